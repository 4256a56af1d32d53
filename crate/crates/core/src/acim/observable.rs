//! Means and correlations against Ulam densities.

use rayon::prelude::*;

use crate::map::PiecewiseMap;

use super::density::Density;
use super::matrix::{TransferMatrix, UlamGrid};

/// Sub-samples per cell next to the boundary set.
pub const BOUNDARY_SUBSAMPLES: usize = 32;

/// Cell averages of `phi`: midpoint rule, refined in cells touching a hole.
pub fn cell_averages(grid: UlamGrid, map: &PiecewiseMap, phi: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let holes = map.hole_locations();
    (0..grid.cell_count)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = grid.cell(i);
            if holes.iter().any(|&c| c >= lo && c <= hi) {
                let k = BOUNDARY_SUBSAMPLES;
                let w = (hi - lo) / k as f64;
                (0..k).map(|j| phi(lo + (j as f64 + 0.5) * w)).sum::<f64>() / k as f64
            } else {
                phi(0.5 * (lo + hi))
            }
        })
        .collect()
}

/// `∫ φ dμ` for the measure with density `d`.
pub fn integrate_observable(d: &Density, map: &PiecewiseMap, phi: impl Fn(f64) -> f64 + Sync) -> f64 {
    let avg = cell_averages(d.grid, map, phi);
    d.values.iter().zip(&avg).map(|(h, a)| h * a).sum::<f64>() * d.grid.width()
}

/// `|⟨Pⁿ(φ·h), ψ⟩ - μ(φ)μ(ψ)|` for `n = 0..=n_max`.
pub fn correlation_estimate(
    d: &Density,
    p: &TransferMatrix,
    map: &PiecewiseMap,
    phi: impl Fn(f64) -> f64 + Sync,
    psi: impl Fn(f64) -> f64 + Sync,
    n_max: usize,
) -> Vec<f64> {
    let w = d.grid.width();
    let a = cell_averages(d.grid, map, phi);
    let b = cell_averages(d.grid, map, psi);
    let mu_a: f64 = d.values.iter().zip(&a).map(|(h, x)| h * x).sum::<f64>() * w;
    let mu_b: f64 = d.values.iter().zip(&b).map(|(h, x)| h * x).sum::<f64>() * w;
    let mut g: Vec<f64> = d.values.iter().zip(&a).map(|(h, x)| h * x).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            g = p.apply(&g);
        }
        let pair: f64 = g.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() * w;
        out.push((pair - mu_a * mu_b).abs());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acim::{build_ulam_matrix, stationary_densities};
    use crate::map::{make_doubling_map, make_lorenz_map, truncate};
    use crate::stats::{fit_exponential_rate, DeviationSeries};

    fn doubling(n: usize) -> (PiecewiseMap, TransferMatrix, Density) {
        let f = make_doubling_map();
        let p = build_ulam_matrix(&f, n).unwrap();
        let d = stationary_densities(&p, 1e-13).unwrap().densities.remove(0);
        (f, p, d)
    }

    #[test]
    fn simple_means() {
        let (f, _, d) = doubling(256);
        assert!((integrate_observable(&d, &f, |_| 1.0) - 1.0).abs() < 1e-12);
        assert!((integrate_observable(&d, &f, |x| x) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn truncated_log_mean() {
        let (f, _, d) = doubling(4096);
        let delta: f64 = 0.1;
        let got = integrate_observable(&d, &f, |x| -truncate(x.min(1.0 - x), delta).ln());
        let want = 2.0 * (delta * (1.0 - delta.ln()) + (1.0 - delta + delta * delta.ln()) * delta / (1.0 - delta));
        assert!((got - want).abs() < 1e-4, "{got} {want}");
    }

    #[test]
    fn constant_observable_does_not_correlate() {
        let (f, p, d) = doubling(256);
        let c = correlation_estimate(&d, &p, &f, |_| 2.0, |x| x * x, 8);
        assert!(c.iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn doubling_correlations_halve() {
        // For Lebesgue the correlation is 2^{-n}/12; the Ulam projection on
        // N cells multiplies it by 1 - 4^n/N².
        let (f, p, d) = doubling(1024);
        let c = correlation_estimate(&d, &p, &f, |x| x - 0.5, |x| x - 0.5, 10);
        for n in 0..=10 {
            let ulam = 0.5f64.powi(n as i32) / 12.0 * (1.0 - 4f64.powi(n as i32) / 1024f64.powi(2));
            assert!((c[n] - ulam).abs() < 1e-15, "n={n} {} {ulam}", c[n]);
        }
    }

    #[test]
    fn lorenz_correlations_decay() {
        let f = make_lorenz_map(0.6).unwrap();
        let p = build_ulam_matrix(&f, 1024).unwrap();
        let d = stationary_densities(&p, 1e-13).unwrap().densities.remove(0);
        let c = correlation_estimate(&d, &p, &f, |x| x, |x| x, 30);
        let s = DeviationSeries::exact((1..=30).map(|n| (n, c[n])).filter(|e| e.1 > 0.0)).unwrap();
        assert!(fit_exponential_rate(&s).unwrap().slope < 0.0);
    }

    #[test]
    fn means_are_linear_in_densities() {
        let (f, _, d) = doubling(64);
        let mut e = d.clone();
        e.values.iter_mut().enumerate().for_each(|(i, v)| *v = 2.0 * (i as f64 + 0.5) / 64.0);
        let mix = Density { values: d.values.iter().zip(&e.values).map(|(a, b)| 0.3 * a + 0.7 * b).collect(), ..d.clone() };
        let phi = |x: f64| (3.0 * x).sin();
        let want = 0.3 * integrate_observable(&d, &f, phi) + 0.7 * integrate_observable(&e, &f, phi);
        assert!((integrate_observable(&mix, &f, phi) - want).abs() < 1e-12);
    }
}
