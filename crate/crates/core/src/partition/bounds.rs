//! Empirical distortion and the measure bounds on return classes.

use rayon::prelude::*;

use crate::map::PiecewiseMap;
use crate::precise::{self, dd, Dd};

use super::initial::InitialPartition;
use super::refine::{Depth, RefinedAtom};

/// Orbit points closer than this to a boundary point are iterated in
/// double-double.
const NEAR: f64 = 1e-4;

/// Branch path of `f^{n+1}` on an atom of level `n`.
pub fn full_path(map: &PiecewiseMap, atom: &RefinedAtom) -> Vec<u8> {
    let mid = (atom.image_lo + atom.image_hi) * 0.5;
    let b = map
        .branch_index_dd(mid)
        .or_else(|| map.branch_index(precise::to_f64(mid)))
        .expect("image inside [0,1]");
    let mut p = atom.path.clone();
    p.push(b as u8);
    p
}

/// `Σ_j log|f'(f^j x)|` along `path`.
fn log_derivative(map: &PiecewiseMap, path: &[u8], x: Dd) -> f64 {
    let mut x = x;
    let mut sum = 0.0;
    for &b in path {
        let br = &map.branches[b as usize];
        let xf = x.hi();
        if map.distance_to_set(xf) < NEAR || xf < NEAR || xf > 1.0 - NEAR {
            sum += br.derivative_dd(x).abs().ln();
            x = br.eval_dd(x);
        } else {
            sum += br.derivative(xf).abs().ln();
            x = dd(br.eval(xf));
        }
    }
    sum
}

/// `max |log|(f^{n+1})'(x)| - log|(f^{n+1})'(y)||` over `samples` stratified
/// points of an atom of level `n`.
pub fn distortion_estimate(atom: &RefinedAtom, map: &PiecewiseMap, samples: usize) -> f64 {
    let path = full_path(map, atom);
    let w = atom.hi - atom.lo;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..samples.max(2) {
        let t = (k as f64 + 0.5) / samples.max(2) as f64;
        let v = log_derivative(map, &path, atom.lo + w * t);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// `D̂`: the largest distortion estimate over a level.
pub fn max_distortion(atoms: &[RefinedAtom], map: &PiecewiseMap, samples: usize) -> f64 {
    atoms
        .par_iter()
        .map(|a| distortion_estimate(a, map, samples))
        .reduce(|| 0.0, f64::max)
}

/// `-Σ log|M(c_i,p_i)|` over the returns (time 0 excluded) deeper than `theta`.
pub fn deep_return_statistic(atom: &RefinedAtom, theta: usize, p0: &InitialPartition) -> f64 {
    atom.return_depths
        .iter()
        .zip(&atom.return_cells)
        .skip(1)
        .filter(|((_, p), _)| *p as usize > theta)
        .map(|(_, &cell)| -p0.cells[cell as usize].len().ln())
        .sum()
}

/// `ξ(ρ₀)`: the least proportion of an image that a return cuts away.
pub fn xi(map: &PiecewiseMap, p0: &InitialPartition) -> f64 {
    let t = &p0.thresholds;
    let kk = t.constants.k0 * t.constants.k1;
    let mut xi = 1.0 / t.constants.k1;
    let r = t.rho0 as f64;
    for a in t.anchors.iter().filter(|a| !a.singular) {
        let dc = map.points[a.point].half_gap;
        let v = (r + 1.0).powf(-1.0 - t.grid.eb()) / (2.0 * dc - t.grid.value(t.rho0 + 2));
        xi = xi.min(v / kk);
    }
    xi
}

/// Rate `ζ₀ = ζ/L₀` with `ζ = -log(1 - ξ/D²)`, `D = exp(D̂)`.
pub fn zeta0(map: &PiecewiseMap, p0: &InitialPartition, distortion: f64, l0: f64) -> f64 {
    let d2 = (2.0 * distortion).exp();
    -(-xi(map, p0) / d2).ln_1p() / l0.max(1.0)
}

/// Largest gap between consecutive returns over a level, counting the time
/// since the last return.
pub fn max_return_gap(atoms: &[RefinedAtom]) -> u32 {
    atoms
        .iter()
        .flat_map(|a| {
            let n = a.level() as u32;
            let last = n - a.return_times.last().copied().unwrap_or(0);
            a.return_times.windows(2).map(|w| w[1] - w[0]).chain([last])
        })
        .max()
        .unwrap_or(1)
}

/// A return class: return times `t_1 < … < t_u` with their depths.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnClass {
    pub times: Vec<u32>,
    pub depths: Vec<Depth>,
}

impl ReturnClass {
    pub fn contains(&self, atom: &RefinedAtom) -> bool {
        atom.return_times[1..] == self.times[..] && atom.return_depths[1..] == self.depths[..]
    }

    pub fn of(atom: &RefinedAtom) -> Self {
        ReturnClass { times: atom.return_times[1..].to_vec(), depths: atom.return_depths[1..].to_vec() }
    }
}

/// `C₀·e^{-ζ₀(n-R)}·σ^{-R+r}·Π_{p_i>ρ₀}|M(c_i,p_i)|^{β₃-β₂}`.
pub fn predicted_class_bound(n: u32, class: &ReturnClass, p0: &InitialPartition, sigma: f64, zeta0: f64) -> f64 {
    let t = &p0.thresholds;
    let mut big_r = 0u32;
    let mut r = 0i32;
    let mut prod = 1.0;
    let mut prev = 0u32;
    for (&tm, &(c, p)) in class.times.iter().zip(&class.depths) {
        if p as usize > t.rho0 {
            big_r += tm - prev;
            r += 1;
            let m = p0.cell_of(c as usize, p as usize).map_or(0.0, |i| p0.cells[i].len());
            prod *= m.powf(t.beta3 - t.beta2);
        }
        prev = tm;
    }
    p0.class_constant() * (-zeta0 * (n - big_r.min(n)) as f64).exp() * sigma.powi(r - big_r as i32) * prod
}

/// Lebesgue measure of the atoms of a level in a class.
pub fn class_measure(atoms: &[RefinedAtom], class: &ReturnClass) -> f64 {
    atoms.iter().filter(|a| class.contains(a)).map(RefinedAtom::len).sum()
}
