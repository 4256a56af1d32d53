//! Survivor sets of the open system with holes around the boundary set.

use crate::error::{Error, Result};
use crate::map::PiecewiseMap;
use crate::precise::{self, dd, Dd};

/// Default ceiling on the number of survivor intervals.
pub const DEFAULT_INTERVAL_LIMIT: usize = 1 << 24;

/// `{x : d(f^j x, D) > δ for 0 < j < n}` as disjoint intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivorSet {
    pub n: usize,
    pub intervals: Vec<(f64, f64)>,
    pub total_measure: f64,
}

/// Complement of the open `δ`-neighbourhood of the holes.
fn allowed(map: &PiecewiseMap, delta: f64) -> Vec<(f64, f64)> {
    let mut holes: Vec<f64> = map.points.iter().filter(|p| !p.removable).map(|p| p.location).collect();
    holes.sort_by(f64::total_cmp);
    holes.dedup();
    let mut out = Vec::new();
    let mut at = 0.0;
    for h in holes {
        let (a, b) = ((h - delta).max(0.0), (h + delta).min(1.0));
        if a > at {
            out.push((at, a));
        }
        at = at.max(b);
    }
    if at < 1.0 {
        out.push((at, 1.0));
    }
    out
}

fn intersect(a: &[(f64, f64)], b: &[(Dd, Dd)]) -> Vec<(Dd, Dd)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = precise::max(b[j].0, dd(a[i].0));
        let hi = precise::min(b[j].1, dd(a[i].1));
        if lo < hi {
            out.push((lo, hi));
        }
        if dd(a[i].1) < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// Survivors up to time `n`, by pulling the allowed set back `n - 1` times.
/// Endpoints are carried in double-double; for affine branches with
/// dyadic slopes the pull-backs are exact up to `n ≈ 50`.
pub fn survivor_measure(map: &PiecewiseMap, delta: f64, n: usize, limit: usize) -> Result<SurvivorSet> {
    if !(delta > 0.0) || map.branches.iter().any(|b| 2.0 * delta >= b.len()) {
        return Err(Error::InvalidParameters(format!("hole radius {delta} must be below half of every branch")));
    }
    let good = allowed(map, delta);
    let mut set = vec![(dd(0.0), dd(1.0))];
    for level in 1..n {
        let target = intersect(&good, &set);
        let mut next = Vec::new();
        for br in &map.branches {
            let (ilo, ihi) = br.image();
            for &(a, b) in &target {
                let (a, b) = (precise::max(a, dd(ilo)), precise::min(b, dd(ihi)));
                if a < b {
                    let (x, y) = (br.inverse_dd(a), br.inverse_dd(b));
                    next.push(if x < y { (x, y) } else { (y, x) });
                }
            }
            if next.len() > limit {
                return Err(Error::IntervalCountOverflow { level, limit });
            }
        }
        next.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite endpoints"));
        set = next;
    }
    let total = set.iter().fold(dd(0.0), |acc, &(a, b)| acc + (b - a));
    let total_measure = precise::to_f64(total);
    let intervals = set.iter().map(|&(a, b)| (precise::to_f64(a), precise::to_f64(b))).collect();
    Ok(SurvivorSet { n, intervals, total_measure })
}
