//! Deviations of Birkhoff averages from the equilibrium means, and tail sets
//! of the recurrence sums.

use crate::error::{Error, Result};
use crate::map::{PiecewiseMap, TruncationParams};

use super::recurrence::{delta_sums, Estimate};
use super::fit::Method;
use super::sampler::{proportion, uniform, Sampler};

/// Distance from `v` to the interval spanned by `means`.
pub fn hull_distance(v: f64, means: &[f64]) -> f64 {
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if v < lo {
        lo - v
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

/// Measure of `{x : d((1/n) S_n φ(x), hull of means) > ε}`. Orbits meeting
/// the boundary set count as deviating.
pub fn observable_deviation_measure<F>(
    map: &PiecewiseMap,
    phi: F,
    means: &[f64],
    epsilon: f64,
    n: usize,
    sampler: &Sampler,
) -> Result<Estimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    if means.is_empty() {
        return Err(Error::InvalidParameters("no equilibrium means given".into()));
    }
    let c = sampler.tally(1, |rng, c| {
        let hit = match map.birkhoff_sum(&phi, uniform(rng), n) {
            Ok(s) => hull_distance(s / n as f64, means) > epsilon,
            Err(_) => true,
        };
        c[0] += hit as u64;
    })?;
    let (m, se) = proportion(c[0], sampler.count);
    Ok(Estimate { measure: m, stderr: se, method: Method::MonteCarlo })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailEntry {
    pub n: usize,
    /// Fraction with `S_mΔ_δ ≥ ζm` for some `m` in `[n, max n + W]`.
    pub fraction: f64,
    pub stderr: f64,
    /// The same with horizon `max n + 2W`.
    pub fraction_2w: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub entries: Vec<TailEntry>,
    pub window: usize,
    /// `λ{E(x) > n}`; the expansion tail is empty under uniform expansion.
    pub expansion_tail: f64,
}

/// Fractions of samples whose recurrence tail `R(x)` exceeds each `n`.
///
/// `R(x) > n` means `S_mΔ_δ(x) ≥ ζm` for some `m ≥ n`; the search over `m`
/// stops at a common horizon so the fractions stay monotone in `n`.
pub fn tail_set_report(
    map: &PiecewiseMap,
    delta: f64,
    zeta: f64,
    ns: &[usize],
    window: usize,
    sampler: &Sampler,
) -> Result<TailReport> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidParameters("zeta must be positive".into()));
    }
    let params = TruncationParams::new(delta)?;
    let top = ns.iter().copied().max().unwrap_or(0);
    let (h1, h2) = (top + window, top + 2 * window);
    let k = ns.len();
    let counts = sampler.tally(2 * k, |rng, c| {
        let mut sums = vec![0.0; h2];
        delta_sums(map, params, uniform(rng), &mut sums);
        // Last m (1-based) with S_m ≥ ζm, within each horizon.
        let last = |h: usize| (1..=h).rev().find(|&m| sums[m - 1] >= zeta * m as f64).unwrap_or(0);
        let (l1, l2) = (last(h1), last(h2));
        for (i, &n) in ns.iter().enumerate() {
            c[i] += (l1 >= n.max(1)) as u64;
            c[k + i] += (l2 >= n.max(1)) as u64;
        }
    })?;
    let entries = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (f, se) = proportion(counts[i], sampler.count);
            TailEntry { n, fraction: f, stderr: se, fraction_2w: counts[k + i] as f64 / sampler.count as f64 }
        })
        .collect();
    Ok(TailReport { entries, window, expansion_tail: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{make_doubling_map, make_lorenz_map};

    #[test]
    fn hull() {
        assert_eq!(hull_distance(0.5, &[0.4, 0.6]), 0.0);
        assert!((hull_distance(0.1, &[0.4, 0.6]) - 0.3).abs() < 1e-15);
        assert!((hull_distance(0.9, &[0.5]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn birkhoff_average_concentrates() {
        let f = make_doubling_map();
        let s = Sampler::new(5, 100_000);
        let e = observable_deviation_measure(&f, |x| x, &[0.5], 0.4, 30, &s).unwrap();
        assert!(e.measure < 1e-2);
        let e0 = observable_deviation_measure(&f, |x| x, &[0.5], 0.0, 30, &s).unwrap();
        assert!(e0.measure > 0.99);
    }

    #[test]
    fn tail_fractions() {
        let f = make_lorenz_map(0.6).unwrap();
        let s = Sampler::new(9, 20_000);
        let ns = [1, 5, 10, 20, 40];
        let big = tail_set_report(&f, 0.01, 1e6, &ns, 50, &s).unwrap();
        assert!(big.entries.iter().all(|e| e.fraction == 0.0));
        let r = tail_set_report(&f, 0.01, 0.5, &ns, 50, &s).unwrap();
        for w in r.entries.windows(2) {
            assert!(w[1].fraction <= w[0].fraction);
        }
        assert!(r.entries[0].fraction > 0.0);
        assert!(r.entries.iter().all(|e| e.fraction_2w >= e.fraction));
    }
}
