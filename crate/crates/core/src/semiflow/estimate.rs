//! Flow-level deviation and escape measures under `λ^τ`.

use rand_chacha::ChaCha8Rng;

use crate::acim::{integrate_observable, EquilibriumSet};
use crate::error::{Error, Result};
use crate::stats::fit::{DeviationSeries, Method, SeriesEntry};
use crate::stats::hull_distance;
use crate::stats::sampler::{uniform, Sampler};

use super::flow::{InducedObservable, SemiflowState, Suspension};

/// Flow means `μ(φ)/μ(τ)` for each density, with `φ` and `τ` taken on the
/// zero fiber.
pub fn flow_targets(set: &EquilibriumSet, flow: &Suspension, phi: &InducedObservable) -> Result<Vec<f64>> {
    let map = flow.base();
    let mut out = Vec::new();
    for d in &set.densities {
        let a = integrate_observable(d, map, |x| phi.base_fn(flow, x).unwrap_or(f64::NAN));
        let b = integrate_observable(d, map, |x| flow.tau(x, 0.0).unwrap_or(f64::NAN));
        if !(a.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameters("flow mean is not finite".into()));
        }
        out.push(a / b);
    }
    Ok(out)
}

/// A `λ^τ` sample: `x`, `y` uniform, `s` uniform under the roof, and its
/// weight `τ(x,y)/∫τ`.
fn draw(flow: &Suspension, leb_tau: f64, rng: &mut ChaCha8Rng) -> Option<(SemiflowState, f64)> {
    let x = uniform(rng);
    let y = 2.0 * uniform(rng) - 1.0;
    let u = uniform(rng);
    let tau = flow.tau(x, y).ok()?;
    Some((SemiflowState { x, y, s: u * tau }, tau / leb_tau))
}

fn check_times(ts: &[usize]) -> Result<()> {
    if ts.is_empty() || ts[0] == 0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameters("flow times must be positive and increasing".into()));
    }
    Ok(())
}

/// Time averages of `ψ` at every `T` in `ts` along one orbit, through
/// `(1/T)(S_nφ(x) - ∫_0^s ψ + ∫_0^{s+T-S_nτ} ψ(Fⁿx, ·))`.
pub fn averages_along(flow: &Suspension, phi: &InducedObservable, z: SemiflowState, ts: &[usize]) -> Result<Vec<f64>> {
    let head = phi.partial(z.x, z.y, 0.0, z.s);
    let (mut x, mut y) = (z.x, z.y);
    let (mut s_tau, mut s_phi) = (0.0, 0.0);
    let mut j = 0;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let total = z.s + t as f64;
        loop {
            let tau = flow.tau(x, y).map_err(|_| Error::OrbitHitSingular { index: j })?;
            if s_tau + tau > total {
                break;
            }
            s_tau += tau;
            s_phi += phi.partial(x, y, 0.0, tau);
            (x, y) = flow.skew.step(x, y).map_err(|_| Error::OrbitHitSingular { index: j })?;
            j += 1;
        }
        let tail = phi.partial(x, y, 0.0, total - s_tau);
        out.push((s_phi - head + tail) / t as f64);
    }
    Ok(out)
}

fn weighted_series(sums: &[f64], count: u64, ts: &[usize]) -> Result<DeviationSeries> {
    let n = count as f64;
    let mut series = DeviationSeries::default();
    for (k, &t) in ts.iter().enumerate() {
        let m = sums[2 * k] / n;
        let se = if sums[2 * k] == 0.0 { 3.0 / n } else { ((sums[2 * k + 1] / n - m * m).max(0.0) / n).sqrt() };
        series.push(SeriesEntry { n: t, measure: m, stderr: se, method: Method::MonteCarlo })?;
    }
    Ok(series)
}

/// `λ^τ{z : d((1/T)∫_0^T ψ(φ^t z) dt, hull of targets) > ε}` for each `T`.
/// Orbits meeting the boundary set count as deviating.
pub fn flow_deviation_series(
    flow: &Suspension,
    phi: &InducedObservable,
    targets: &[f64],
    epsilon: f64,
    ts: &[usize],
    sampler: &Sampler,
) -> Result<DeviationSeries> {
    check_times(ts)?;
    if targets.is_empty() {
        return Err(Error::InvalidParameters("no flow means to compare against".into()));
    }
    let leb = flow.roof.integral(flow.base())?;
    let sums = sampler.accumulate(2 * ts.len(), |rng, acc| {
        let Some((z, w)) = draw(flow, leb, rng) else {
            return;
        };
        match averages_along(flow, phi, z, ts) {
            Ok(avg) => {
                for (k, a) in avg.iter().enumerate() {
                    if hull_distance(*a, targets) > epsilon {
                        acc[2 * k] += w;
                        acc[2 * k + 1] += w * w;
                    }
                }
            }
            Err(_) => {
                for k in 0..ts.len() {
                    acc[2 * k] += w;
                    acc[2 * k + 1] += w * w;
                }
            }
        }
    })?;
    weighted_series(&sums, sampler.count, ts)
}

pub fn flow_deviation_measure(
    flow: &Suspension,
    phi: &InducedObservable,
    targets: &[f64],
    epsilon: f64,
    t: usize,
    sampler: &Sampler,
) -> Result<(f64, f64)> {
    let e = flow_deviation_series(flow, phi, targets, epsilon, &[t], sampler)?.entries[0];
    Ok((e.measure, e.stderr))
}

/// A finite union of closed subintervals of `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseSet {
    pub intervals: Vec<(f64, f64)>,
}

impl BaseSet {
    pub fn whole() -> Self {
        BaseSet { intervals: vec![(0.0, 1.0)] }
    }

    /// `[0,1]` minus the open intervals `holes`.
    pub fn complement_of(holes: &[(f64, f64)]) -> Self {
        let mut h: Vec<(f64, f64)> = holes.to_vec();
        h.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::new();
        let mut at = 0.0;
        for (a, b) in h {
            if a > at {
                out.push((at, a.min(1.0)));
            }
            at = f64::max(at, b);
        }
        if at < 1.0 {
            out.push((at, 1.0));
        }
        BaseSet { intervals: out }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| x >= a && x <= b)
    }
}

/// `λ^τ` of the states of the suspension over `k` whose orbit stays over
/// `k` up to time `T`, for each `T`.
pub fn flow_escape_series(flow: &Suspension, k: &BaseSet, ts: &[usize], sampler: &Sampler) -> Result<DeviationSeries> {
    check_times(ts)?;
    let leb = flow.roof.integral(flow.base())?;
    let sums = sampler.accumulate(2 * ts.len(), |rng, acc| {
        let Some((z, w)) = draw(flow, leb, rng) else {
            return;
        };
        if !k.contains(z.x) {
            return;
        }
        let (mut x, mut y) = (z.x, z.y);
        let mut s_tau = 0.0;
        for (i, &t) in ts.iter().enumerate() {
            let total = z.s + t as f64;
            loop {
                let Ok(tau) = flow.tau(x, y) else {
                    return;
                };
                if s_tau + tau > total {
                    break;
                }
                s_tau += tau;
                let Ok(next) = flow.skew.step(x, y) else {
                    return;
                };
                (x, y) = next;
                if !k.contains(x) {
                    return;
                }
            }
            acc[2 * i] += w;
            acc[2 * i + 1] += w * w;
        }
    })?;
    weighted_series(&sums, sampler.count, ts)
}

pub fn flow_escape_measure(flow: &Suspension, k: &BaseSet, t: usize, sampler: &Sampler) -> Result<(f64, f64)> {
    let e = flow_escape_series(flow, k, &[t], sampler)?.entries[0];
    Ok((e.measure, e.stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acim::{build_ulam_matrix, stationary_densities};
    use crate::map::make_lorenz_map;
    use crate::semiflow::{Drift, FlowObservable, RoofFunction, SkewProduct};
    use crate::stats::with_workers;

    fn lorenz() -> Suspension {
        let sp = SkewProduct::new(make_lorenz_map(0.6).unwrap(), 0.5, Drift { slope: 0.4, offset: 0.0 }).unwrap();
        Suspension::new(sp, RoofFunction::new(1.0, 1.0, 0.05).unwrap())
    }

    fn targets(f: &Suspension, phi: &InducedObservable) -> Vec<f64> {
        let p = build_ulam_matrix(f.base(), 1024).unwrap();
        let e = stationary_densities(&p, 1e-12).unwrap();
        flow_targets(&e, f, phi).unwrap()
    }

    #[test]
    fn constant_never_deviates() {
        let f = lorenz();
        let phi = InducedObservable::new(FlowObservable::constant(1.0), 1.0 / 16.0).unwrap();
        let m = flow_deviation_measure(&f, &phi, &[1.0], 0.01, 20, &Sampler::new(1, 2000)).unwrap();
        assert_eq!(m.0, 0.0);
    }

    #[test]
    fn epsilon_limits() {
        let f = lorenz();
        let phi = InducedObservable::new(FlowObservable::coordinate_x(), 1.0 / 16.0).unwrap();
        let t = targets(&f, &phi);
        let s = Sampler::new(2, 4000);
        assert_eq!(flow_deviation_measure(&f, &phi, &t, 10.0, 20, &s).unwrap().0, 0.0);
        let small = flow_deviation_measure(&f, &phi, &t, 1e-9, 20, &s).unwrap().0;
        assert!(small > 0.95, "{small}");
    }

    #[test]
    fn long_average_approaches_flow_mean() {
        let f = lorenz();
        let phi = InducedObservable::new(FlowObservable::coordinate_x(), 1.0 / 64.0).unwrap();
        let t = targets(&f, &phi);
        let z = f.state(0.3141, 0.2, 0.1).unwrap();
        let a = averages_along(&f, &phi, z, &[1000, 10_000]).unwrap();
        assert!((a[0] - a[1]).abs() < 1e-2);
        assert!((a[1] - t[0]).abs() < 2e-2, "{a:?} {t:?}");
    }

    #[test]
    fn escape_whole_space_and_monotone() {
        let f = lorenz();
        let s = Sampler::new(4, 4000);
        let all = flow_escape_measure(&f, &BaseSet::whole(), 30, &s).unwrap();
        assert!((all.0 - 1.0).abs() < 0.05);
        let k = BaseSet::complement_of(&[(0.45, 0.55)]);
        let e = flow_escape_series(&f, &k, &[5, 10, 20], &s).unwrap();
        for w in e.entries.windows(2) {
            assert!(w[1].measure <= w[0].measure);
        }
        assert!(e.entries[2].measure < e.entries[0].measure);
    }

    #[test]
    fn workers_do_not_change_measures() {
        let f = lorenz();
        let phi = InducedObservable::new(FlowObservable::coordinate_x(), 1.0 / 16.0).unwrap();
        let s = Sampler::new(9, 3000);
        let run = || flow_deviation_series(&f, &phi, &[0.5], 0.1, &[10, 20], &s).unwrap();
        assert_eq!(with_workers(1, run), with_workers(2, run));
    }
}
