//! Invariant densities of the Ulam matrix.

use std::collections::BTreeMap;
use std::io::{self, Write};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::map::PiecewiseMap;

use super::matrix::{TransferMatrix, UlamGrid};
use super::observable::integrate_observable;

/// Entries at or below this are not edges of the support graph.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Iteration cap for the power method.
pub const MAX_ITERATIONS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    pub grid: UlamGrid,
    /// Cell values, `Σ values/N = 1`.
    pub values: Vec<f64>,
    /// `‖hP - h‖₁` on the density scale.
    pub residual: f64,
    pub component_id: usize,
}

impl Density {
    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.grid.locate(x)]
    }

    /// Cells carrying mass.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i)
    }
}

/// The Ulam approximation of the equilibrium set: one density per
/// recurrent class, with cached means.
#[derive(Clone, Debug, Default)]
pub struct EquilibriumSet {
    pub densities: Vec<Density>,
    pub means: BTreeMap<String, Vec<f64>>,
}

impl EquilibriumSet {
    /// Integrate `phi` against every density and cache the means under `name`.
    pub fn register(&mut self, name: &str, map: &PiecewiseMap, phi: impl Fn(f64) -> f64 + Sync) -> &[f64] {
        let m: Vec<f64> = self.densities.iter().map(|d| integrate_observable(d, map, &phi)).collect();
        self.means.insert(name.to_string(), m);
        &self.means[name]
    }

    /// CSV rows `cell_lo,cell_hi,density_value,component_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "cell_lo,cell_hi,density_value,component_id")?;
        for d in &self.densities {
            for (i, v) in d.values.iter().enumerate() {
                let (lo, hi) = d.grid.cell(i);
                writeln!(w, "{lo},{hi},{v},{}", d.component_id)?;
            }
        }
        Ok(())
    }
}

/// Closed communicating classes of the support graph, each sorted.
pub fn recurrent_classes(p: &TransferMatrix) -> Vec<Vec<usize>> {
    let n = p.size();
    let mut g = DiGraph::<(), ()>::with_capacity(n, p.nnz());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for (j, v) in p.row(i) {
            if v > SUPPORT_THRESHOLD {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comp = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (k, c) in sccs.iter().enumerate() {
        for v in c {
            comp[v.index()] = k;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(k, c)| {
            c.iter().all(|v| {
                p.row(v.index()).all(|(j, w)| w <= SUPPORT_THRESHOLD || comp[j] == *k)
            })
        })
        .map(|(_, c)| {
            let mut c: Vec<usize> = c.iter().map(|v| v.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    closed.sort();
    closed
}

fn l1(a: &[f64], b: &[f64], w: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * w
}

/// Lazy power iteration `h ← (h + hP)/2` restricted to `class`, until
/// `‖hP - h‖₁ < tol`.
fn fixed_vector(p: &TransferMatrix, class: &[usize], tol: f64) -> Result<(Vec<f64>, f64)> {
    let n = p.size();
    let w = p.grid.width();
    let mut inside = vec![false; n];
    for &i in class {
        inside[i] = true;
    }
    let mut h = vec![0.0; n];
    for &i in class {
        h[i] = n as f64 / class.len() as f64;
    }
    let mut defect = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut next = p.apply(&h);
        for (v, &ok) in next.iter_mut().zip(&inside) {
            if !ok {
                *v = 0.0;
            }
        }
        defect = l1(&next, &h, w);
        if defect < tol {
            return Ok((h, defect));
        }
        let mut mass = 0.0;
        for (a, b) in h.iter_mut().zip(&next) {
            *a = 0.5 * (*a + b);
            mass += *a;
        }
        let scale = n as f64 / mass;
        h.iter_mut().for_each(|v| *v *= scale);
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, defect })
}

/// One density per recurrent class of the support graph of `p`.
pub fn stationary_densities(p: &TransferMatrix, tol: f64) -> Result<EquilibriumSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameters(format!("tolerance must be positive, got {tol}")));
    }
    let mut set = EquilibriumSet::default();
    for class in recurrent_classes(p) {
        let (values, residual) = fixed_vector(p, &class, tol)?;
        let component_id = set.densities.len();
        set.densities.push(Density { grid: p.grid, values, residual, component_id });
    }
    Ok(set)
}

/// Three-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `‖Lh - h‖₁` for the exact transfer operator `L` of `map` acting on the
/// step function `h`. Unlike [`Density::residual`] this sees the
/// discretization error.
pub fn operator_residual(map: &PiecewiseMap, d: &Density) -> f64 {
    let grid = d.grid;
    let n = grid.cell_count;
    let mut ys: Vec<f64> = (0..=n).map(|k| grid.edge(k)).collect();
    for br in &map.branches {
        let (a, b) = br.image();
        ys.extend([a, b]);
        let first = (br.lo * n as f64).ceil() as usize;
        let last = ((br.hi * n as f64).floor() as usize).min(n);
        ys.extend((first..=last).map(|k| br.eval(grid.edge(k))));
    }
    ys.retain(|y| (0.0..=1.0).contains(y));
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut total = 0.0;
    for w in ys.windows(2) {
        let (y0, y1) = (w[0], w[1]);
        if y1 <= y0 {
            continue;
        }
        let mid = 0.5 * (y0 + y1);
        let half = 0.5 * (y1 - y0);
        // On this piece each branch preimage stays in one cell.
        let parts: Vec<(usize, f64)> = map
            .branches
            .iter()
            .enumerate()
            .filter(|(_, br)| {
                let (a, b) = br.image();
                mid > a && mid < b
            })
            .map(|(k, br)| (k, d.values[grid.locate(br.inverse(mid))]))
            .collect();
        let h_here = d.values[grid.locate(mid)];
        for (t, wt) in GAUSS {
            let y = mid + half * t;
            let lh: f64 = parts
                .iter()
                .map(|&(k, v)| {
                    let br = &map.branches[k];
                    v / br.derivative(br.inverse(y)).abs()
                })
                .sum();
            total += wt * half * (lh - h_here).abs();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acim::build_ulam_matrix;
    use crate::map::families::point;
    use crate::map::{make_doubling_map, make_lorenz_map, Branch, BranchKind, End, PiecewiseMap, Side};

    fn tent() -> PiecewiseMap {
        let b0 = Branch::new(0.0, 0.5, 0.0, 1.0, BranchKind::Affine, End::Lo).unwrap();
        let b1 = Branch::new(0.5, 1.0, 1.0, 0.0, BranchKind::Affine, End::Lo).unwrap();
        let mut pts = vec![point(0.5, Side::Minus, 1.0, 0.25), point(0.5, Side::Plus, 1.0, 0.25)];
        pts.iter_mut().for_each(|p| p.removable = true);
        PiecewiseMap::new(vec![b0, b1], pts, crate::map::DEFAULT_TOLERANCE).unwrap()
    }

    #[test]
    fn doubling_density_is_constant() {
        let p = build_ulam_matrix(&make_doubling_map(), 1024).unwrap();
        let e = stationary_densities(&p, 1e-13).unwrap();
        assert_eq!(e.densities.len(), 1);
        let d = &e.densities[0];
        assert!(d.residual < 1e-12);
        let err: f64 = d.values.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / 1024.0;
        assert!(err < 1e-6);
    }

    #[test]
    fn tent_density_is_constant() {
        let p = build_ulam_matrix(&tent(), 256).unwrap();
        let e = stationary_densities(&p, 1e-13).unwrap();
        assert_eq!(e.densities.len(), 1);
        assert!(e.densities[0].values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn lorenz_operator_residual_shrinks() {
        let f = make_lorenz_map(0.6).unwrap();
        let r: Vec<f64> = [256, 512, 1024]
            .iter()
            .map(|&n| {
                let p = build_ulam_matrix(&f, n).unwrap();
                let e = stationary_densities(&p, 1e-12).unwrap();
                assert_eq!(e.densities.len(), 1);
                assert!(e.densities[0].residual < 1e-12);
                operator_residual(&f, &e.densities[0])
            })
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn doubling_operator_residual_vanishes() {
        let f = make_doubling_map();
        let p = build_ulam_matrix(&f, 64).unwrap();
        let e = stationary_densities(&p, 1e-13).unwrap();
        assert!(operator_residual(&f, &e.densities[0]) < 1e-12);
    }

    #[test]
    fn two_invariant_halves() {
        // Two doubling maps on [0,½] and [½,1].
        let mk = |lo: f64, hi: f64| {
            let m = 0.5 * (lo + hi);
            vec![
                Branch::new(lo, m, lo, hi, BranchKind::Affine, End::Lo).unwrap(),
                Branch::new(m, hi, lo, hi, BranchKind::Affine, End::Lo).unwrap(),
            ]
        };
        let mut branches = mk(0.0, 0.5);
        branches.extend(mk(0.5, 1.0));
        let mut pts = Vec::new();
        for c in [0.25, 0.5, 0.75] {
            pts.push(point(c, Side::Minus, 1.0, 0.1));
            pts.push(point(c, Side::Plus, 1.0, 0.1));
        }
        let f = PiecewiseMap::new(branches, pts, crate::map::DEFAULT_TOLERANCE).unwrap();
        let p = build_ulam_matrix(&f, 64).unwrap();
        let mut e = stationary_densities(&p, 1e-13).unwrap();
        assert_eq!(e.densities.len(), 2);
        let m = e.register("x", &f, |x| x).to_vec();
        assert!((m[0] - 0.25).abs() < 1e-12 && (m[1] - 0.75).abs() < 1e-12);
        let mut csv = Vec::new();
        e.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 2 * 64);
    }
}
