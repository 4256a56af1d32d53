//! Measure of `{x : (1/n) S_n Δ_δ(x) > ε}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::{PiecewiseMap, TruncationParams};

use super::fit::{DeviationSeries, Method, SeriesEntry};
use super::sampler::{proportion, uniform, Sampler};

/// Largest `n` accepted by the exact mode unless overridden.
pub const DEFAULT_EXACT_CAP: usize = 16;

/// Sample points per smooth piece in the exact mode.
const PIECE_SAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub measure: f64,
    pub stderr: f64,
    pub method: Method,
}

impl Estimate {
    pub fn entry(&self, n: usize) -> SeriesEntry {
        SeriesEntry { n, measure: self.measure, stderr: self.stderr, method: self.method }
    }
}

/// `S_kΔ_δ(x)` for `k = 1..=out.len()`. Once the orbit meets the boundary
/// set the sums are infinite.
pub fn delta_sums(map: &PiecewiseMap, params: TruncationParams, x: f64, out: &mut [f64]) {
    let mut x = x;
    let mut sum = 0.0;
    for k in 0..out.len() {
        let d = map.truncated_distance(x, params);
        if d <= 0.0 {
            out[k..].fill(f64::INFINITY);
            return;
        }
        sum += -d.ln();
        out[k] = sum;
        if k + 1 < out.len() {
            match map.evaluate(x) {
                Ok(y) => x = y,
                Err(_) => {
                    out[k + 1..].fill(f64::INFINITY);
                    return;
                }
            }
        }
    }
}

/// Monte-Carlo estimates for several `n` from one set of samples.
pub fn recurrence_deviation_series(
    map: &PiecewiseMap,
    delta: f64,
    epsilon: f64,
    ns: &[usize],
    sampler: &Sampler,
) -> Result<DeviationSeries> {
    let params = TruncationParams::new(delta)?;
    let horizon = ns.iter().copied().max().unwrap_or(0);
    let counts = sampler.tally(ns.len(), |rng, c| {
        let mut sums = vec![0.0; horizon];
        delta_sums(map, params, uniform(rng), &mut sums);
        for (slot, &n) in c.iter_mut().zip(ns) {
            if n > 0 && sums[n - 1] > epsilon * n as f64 {
                *slot += 1;
            }
        }
    })?;
    let mut series = DeviationSeries::default();
    for (&n, &hits) in ns.iter().zip(&counts) {
        let (m, se) = proportion(hits, sampler.count);
        series.push(SeriesEntry { n, measure: m, stderr: se, method: Method::MonteCarlo })?;
    }
    Ok(series)
}

/// Either Monte-Carlo with the given sampler or exact intervals up to `cap`.
#[derive(Clone, Copy, Debug)]
pub enum Mode {
    MonteCarlo(Sampler),
    Exact { cap: usize },
}

pub fn recurrence_deviation_measure(
    map: &PiecewiseMap,
    delta: f64,
    epsilon: f64,
    n: usize,
    mode: Mode,
) -> Result<Estimate> {
    match mode {
        Mode::MonteCarlo(s) => {
            let e = recurrence_deviation_series(map, delta, epsilon, &[n], &s)?.entries[0];
            Ok(Estimate { measure: e.measure, stderr: e.stderr, method: Method::MonteCarlo })
        }
        Mode::Exact { cap } => {
            if n > cap {
                return Err(Error::ExactCapExceeded { n, cap });
            }
            let m = exact_deviation(map, delta, epsilon, n)?;
            Ok(Estimate { measure: m, stderr: 0.0, method: Method::ExactIntervals })
        }
    }
}

/// A maximal interval on which `f^n` is one composition of branches.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub lo: f64,
    pub hi: f64,
    pub path: Vec<u8>,
}

fn pull_back(map: &PiecewiseMap, path: &[u8], y: f64) -> f64 {
    path.iter().rev().fold(y, |y, &b| map.branches[b as usize].inverse(y))
}

fn push_forward(map: &PiecewiseMap, path: &[u8], x: f64) -> f64 {
    path.iter().fold(x, |x, &b| map.branches[b as usize].eval(x))
}

/// Cylinders of `f^n`, in increasing order.
pub fn cylinders(map: &PiecewiseMap, n: usize) -> Vec<Cylinder> {
    // Each entry carries its image under f^{len(path)}, which lies inside
    // one branch domain.
    let mut out: Vec<(Cylinder, f64, f64)> = map
        .branches
        .iter()
        .map(|br| (Cylinder { lo: br.lo, hi: br.hi, path: Vec::new() }, br.lo, br.hi))
        .collect();
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * map.branches.len());
        for (c, ilo, ihi) in out {
            let mid = 0.5 * (ilo + ihi);
            let b = map.branch_index(mid).expect("image inside [0,1]");
            let br = &map.branches[b];
            let mut path = c.path.clone();
            path.push(b as u8);
            let (u, v) = (br.eval(ilo), br.eval(ihi));
            let (jlo, jhi) = if u < v { (u, v) } else { (v, u) };
            let mut cuts = vec![jlo];
            cuts.extend(map.branches[..map.branches.len() - 1].iter().map(|x| x.hi).filter(|&y| y > jlo && y < jhi));
            cuts.push(jhi);
            let mut pieces: Vec<(Cylinder, f64, f64)> = cuts
                .windows(2)
                .map(|w| {
                    let x0 = if w[0] == jlo { None } else { Some(pull_back(map, &path, w[0])) };
                    let x1 = if w[1] == jhi { None } else { Some(pull_back(map, &path, w[1])) };
                    let (e0, e1) = if u < v { (c.lo, c.hi) } else { (c.hi, c.lo) };
                    let (a, z) = (x0.unwrap_or(e0), x1.unwrap_or(e1));
                    let (lo, hi) = if a < z { (a, z) } else { (z, a) };
                    (Cylinder { lo, hi, path: path.clone() }, w[0], w[1])
                })
                .collect();
            pieces.sort_by(|a, b| a.0.lo.total_cmp(&b.0.lo));
            next.extend(pieces);
        }
        out = next;
    }
    out.into_iter().map(|(c, _, _)| c).collect()
}

/// `S_nΔ_δ(x) - nε` along a fixed branch path of length `n - 1`.
fn excess(map: &PiecewiseMap, params: TruncationParams, path: &[u8], x: f64, epsilon: f64) -> f64 {
    let mut x = x;
    let mut sum = 0.0;
    for j in 0..=path.len() {
        let d = map.truncated_distance(x, params);
        if d <= 0.0 {
            return f64::INFINITY;
        }
        sum -= d.ln();
        if j < path.len() {
            x = map.branches[path[j] as usize].eval(x);
        }
    }
    sum - epsilon * (path.len() + 1) as f64
}

/// Length of `{g > 0}` on `[a, b]`, `g` smooth: sign changes between sample
/// points are located by bisection to `1e-12`.
fn positive_length(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let k = PIECE_SAMPLES;
    let xs: Vec<f64> = (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect();
    let pos: Vec<bool> = xs.iter().map(|&x| g(x) > 0.0).collect();
    let mut len = 0.0;
    for i in 0..k {
        let (x0, x1) = (xs[i], xs[i + 1]);
        match (pos[i], pos[i + 1]) {
            (true, true) => len += x1 - x0,
            (false, false) => {}
            (p0, _) => {
                let (mut l, mut r) = (x0, x1);
                while r - l > 1e-12 {
                    let m = 0.5 * (l + r);
                    if (g(m) > 0.0) == p0 {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                let root = 0.5 * (l + r);
                len += if p0 { root - x0 } else { x1 - root };
            }
        }
    }
    len
}

fn exact_deviation(map: &PiecewiseMap, delta: f64, epsilon: f64, n: usize) -> Result<f64> {
    let params = TruncationParams::new(delta)?;
    if n == 0 {
        return Ok(0.0);
    }
    let cyl = cylinders(map, n - 1);
    let holes: Vec<f64> = map.points.iter().filter(|p| !p.removable).map(|p| p.location).collect();
    let parts: Vec<f64> = cyl
        .par_iter()
        .map(|c| {
            // Split where some f^j x crosses a case boundary of d_δ.
            let mut cuts = vec![c.lo, c.hi];
            for j in 0..n {
                let p = &c.path[..j];
                let (u, v) = (push_forward(map, p, c.lo), push_forward(map, p, c.hi));
                let (ilo, ihi) = if u < v { (u, v) } else { (v, u) };
                for &h in &holes {
                    for y in [h - 2.0 * delta, h - delta, h + delta, h + 2.0 * delta] {
                        if y > ilo && y < ihi {
                            cuts.push(pull_back(map, p, y));
                        }
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            cuts.windows(2)
                .map(|w| positive_length(|x| excess(map, params, &c.path, x, epsilon), w[0], w[1]))
                .sum::<f64>()
        })
        .collect();
    Ok(parts.iter().sum())
}
