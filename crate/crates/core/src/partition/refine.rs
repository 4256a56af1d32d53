//! Dynamical refinement `P_n → P_{n+1}`.

use rayon::prelude::*;

use crate::map::{Monotone, PiecewiseMap};
use crate::precise::{self, dd, Dd};

use super::initial::{AtomKind, InitialPartition};

/// Children shorter than this are below double-double resolution and go to
/// the overflow mass.
pub const RESOLUTION: f64 = 1e-24;

/// `(point index, depth)`.
pub type Depth = (u32, u32);

#[derive(Clone, Debug, PartialEq)]
pub struct RefinedAtom {
    pub lo: Dd,
    pub hi: Dd,
    /// `f^n` of the atom at its level `n`, as an ordered interval.
    pub image_lo: Dd,
    pub image_hi: Dd,
    /// Branch used at iterates `0..n`.
    pub path: Vec<u8>,
    /// Whether `f^n` reverses orientation on the atom.
    pub reversed: bool,
    pub return_times: Vec<u32>,
    pub return_depths: Vec<Depth>,
    /// Index of the `P_0` cell of each return.
    pub return_cells: Vec<u32>,
    /// Per iterate `1..=n`: the host cell index for free iterates, `None`
    /// at returns or when no single `M^+` contains the image.
    pub hosts: Vec<Option<u32>>,
}

impl RefinedAtom {
    pub fn len(&self) -> f64 {
        precise::to_f64(self.hi - self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn level(&self) -> usize {
        self.path.len()
    }
}

/// Why mass left the refinement.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overflow {
    /// Children whose image fell in a leftover cell (depth beyond `p_max`).
    pub depth: f64,
    /// Children below [`RESOLUTION`].
    pub resolution: f64,
    pub depth_count: usize,
    pub resolution_count: usize,
}

impl Overflow {
    pub fn total(&self) -> f64 {
        self.depth + self.resolution
    }

    fn add(&mut self, o: &Overflow) {
        self.depth += o.depth;
        self.resolution += o.resolution;
        self.depth_count += o.depth_count;
        self.resolution_count += o.resolution_count;
    }
}

/// Level-0 atoms: the atoms of `P_0`, each a return at time 0.
pub fn initial_level(p0: &InitialPartition) -> Vec<RefinedAtom> {
    p0.cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind != AtomKind::Leftover)
        .map(|(i, c)| RefinedAtom {
            lo: c.lo,
            hi: c.hi,
            image_lo: c.lo,
            image_hi: c.hi,
            path: Vec::new(),
            reversed: false,
            return_times: vec![0],
            return_depths: vec![(c.anchor() as u32, c.depth as u32)],
            return_cells: vec![i as u32],
            hosts: Vec::new(),
        })
        .collect()
}

/// Branch holding the open interval `(a, b)`.
fn branch_of(map: &PiecewiseMap, a: Dd, b: Dd) -> usize {
    let mid = (a + b) * 0.5;
    map.branch_index_dd(mid)
        .or_else(|| map.branch_index(precise::to_f64(mid)))
        .expect("image inside [0,1]")
}

/// Preimage of `y` under `f^n` along `path`.
fn pull_back(map: &PiecewiseMap, path: &[u8], y: Dd) -> Dd {
    path.iter().rev().fold(y, |y, &b| map.branches[b as usize].inverse_dd(y))
}

/// Round-off in the image ends is snapped to a nearby cell edge.
const SNAP: f64 = 1e-27;

fn snap(p0: &InitialPartition, y: Dd) -> Dd {
    let i = p0.edges.partition_point(|&e| e < y);
    for k in [i.wrapping_sub(1), i] {
        if let Some(&e) = p0.edges.get(k) {
            if precise::to_f64(precise::abs(e - y)) <= SNAP {
                return e;
            }
        }
    }
    y
}

/// A piece of the next image: `[lo, hi]` with the cell it returns to, if any.
struct Piece {
    lo: Dd,
    hi: Dd,
    cell: Option<usize>,
    host: Option<u32>,
}

/// Split `[a, b]` (inside one branch image, no break inside) into pieces.
fn split_image(p0: &InitialPartition, a: Dd, b: Dd, out: &mut Vec<Piece>) {
    let range = p0.cells_meeting(a, b);
    let full = |i: usize| p0.edges[i] >= a && p0.edges[i + 1] <= b;
    if range.len() >= 4 || !range.clone().any(full) {
        let mid = (a + b) * 0.5;
        let host = p0.cells_meeting(mid, mid).start;
        let (hlo, hhi) = p0.plus(host);
        let hosted = hlo <= a && b <= hhi;
        out.push(Piece { lo: a, hi: b, cell: None, host: hosted.then_some(host as u32) });
        return;
    }
    let start = out.len();
    for i in range.clone().filter(|&i| full(i)) {
        out.push(Piece { lo: p0.edges[i], hi: p0.edges[i + 1], cell: Some(i), host: None });
    }
    // Strict end fragments join their inward neighbour.
    if a < out[start].lo {
        out[start].lo = a;
    }
    let last = out.len() - 1;
    if out[last].hi < b {
        out[last].hi = b;
    }
}

/// One refinement step for a single atom.
fn refine_one(atom: &RefinedAtom, map: &PiecewiseMap, p0: &InitialPartition) -> (Vec<RefinedAtom>, Overflow) {
    let mut overflow = Overflow::default();
    let b = branch_of(map, atom.image_lo, atom.image_hi);
    let branch = &map.branches[b];
    let (u, v) = (branch.eval_dd(atom.image_lo), branch.eval_dd(atom.image_hi));
    let flips = branch.monotone() == Monotone::Decreasing;
    let (a, z) = if flips { (v, u) } else { (u, v) };
    let (a, z) = (snap(p0, a), snap(p0, z));
    let mut path = atom.path.clone();
    path.push(b as u8);
    let reversed = atom.reversed ^ flips;
    let n1 = path.len() as u32;

    // Branch boundaries inside the image always cut it.
    let mut cuts = vec![a];
    cuts.extend(p0.breaks.iter().map(|&c| dd(c)).filter(|&c| c > a && c < z));
    cuts.push(z);
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        split_image(p0, w[0], w[1], &mut pieces);
    }

    let pre = |y: Dd| -> Dd {
        if y == a {
            if reversed { atom.hi } else { atom.lo }
        } else if y == z {
            if reversed { atom.lo } else { atom.hi }
        } else {
            pull_back(map, &path, y)
        }
    };
    let mut children = Vec::with_capacity(pieces.len());
    let mut prev_end: Option<(Dd, Dd)> = None;
    for piece in pieces {
        // Adjacent pieces share an end; pull it back once.
        let x0 = match prev_end {
            Some((y, x)) if y == piece.lo => x,
            _ => pre(piece.lo),
        };
        let x1 = pre(piece.hi);
        prev_end = Some((piece.hi, x1));
        let (lo, hi) = if reversed { (x1, x0) } else { (x0, x1) };
        let len = precise::to_f64(hi - lo);
        if piece.cell.is_some_and(|c| p0.cells[c].kind == AtomKind::Leftover) {
            overflow.depth += len.max(0.0);
            overflow.depth_count += 1;
            continue;
        }
        if !(len > RESOLUTION * precise::to_f64(hi).abs().max(1.0)) {
            overflow.resolution += len.max(0.0);
            overflow.resolution_count += 1;
            continue;
        }
        let mut child = RefinedAtom {
            lo,
            hi,
            image_lo: piece.lo,
            image_hi: piece.hi,
            path: path.clone(),
            reversed,
            return_times: atom.return_times.clone(),
            return_depths: atom.return_depths.clone(),
            return_cells: atom.return_cells.clone(),
            hosts: atom.hosts.clone(),
        };
        child.hosts.push(piece.host);
        if let Some(k) = piece.cell {
            let cell = &p0.cells[k];
            child.return_times.push(n1);
            child.return_depths.push((cell.anchor() as u32, cell.depth as u32));
            child.return_cells.push(k as u32);
        }
        children.push(child);
    }
    (children, overflow)
}

/// `P_n → P_{n+1}`; children stay in the order of their parents.
pub fn refine_step(state: &[RefinedAtom], map: &PiecewiseMap, p0: &InitialPartition) -> (Vec<RefinedAtom>, Overflow) {
    let parts: Vec<(Vec<RefinedAtom>, Overflow)> = state.par_iter().map(|a| refine_one(a, map, p0)).collect();
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    let mut overflow = Overflow::default();
    for (mut kids, o) in parts {
        kids.sort_by(|x, y| x.lo.partial_cmp(&y.lo).expect("finite"));
        out.extend(kids);
        overflow.add(&o);
    }
    (out, overflow)
}

/// All levels `0..=n`, with the overflow accumulated up to each level.
pub fn refine_levels(map: &PiecewiseMap, p0: &InitialPartition, n: usize) -> Vec<(Vec<RefinedAtom>, Overflow)> {
    let mut levels = vec![(initial_level(p0), Overflow::default())];
    for _ in 0..n {
        let (state, acc) = levels.last().expect("level 0");
        let (next, o) = refine_step(state, map, p0);
        let mut total = *acc;
        total.add(&o);
        levels.push((next, total));
    }
    levels
}

/// Forward image of the atom's ends under its path.
pub fn forward_image(map: &PiecewiseMap, atom: &RefinedAtom, steps: usize) -> (Dd, Dd) {
    let mut x = atom.lo;
    let mut y = atom.hi;
    for &b in &atom.path[..steps] {
        let br = &map.branches[b as usize];
        x = br.eval_dd(x);
        y = br.eval_dd(y);
    }
    if x < y { (x, y) } else { (y, x) }
}

/// Check `M ⊆ f^t(ω) ⊆ M^+` at the atom's last return, recomputing the image
/// from the domain. `slack` is relative to `|M|`.
pub fn check_nesting(map: &PiecewiseMap, p0: &InitialPartition, atom: &RefinedAtom, slack: f64) -> bool {
    let (Some(&t), Some(&cell)) = (atom.return_times.last(), atom.return_cells.last()) else {
        return true;
    };
    if t == 0 {
        return true;
    }
    let (lo, hi) = forward_image(map, atom, t as usize);
    let c = &p0.cells[cell as usize];
    let (plo, phi) = p0.plus(cell as usize);
    let s = precise::dd(slack * c.len());
    lo <= c.lo + s && hi >= c.hi - s && lo >= plo - s && hi <= phi + s
}

/// Consecutive returns `(t_{m-1}, t_m)` of an atom that are further apart
/// than `-log|M(c_{m-1},p_{m-1})| / log σ`.
pub fn gap_violations(map: &PiecewiseMap, p0: &InitialPartition, atom: &RefinedAtom) -> Vec<(u32, u32)> {
    let ls = map.sigma.ln();
    atom.return_times
        .windows(2)
        .zip(&atom.return_cells)
        .filter(|(t, &cell)| (t[1] - t[0]) as f64 > -p0.cells[cell as usize].len().ln() / ls)
        .map(|(t, _)| (t[0], t[1]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::make_lorenz_map;
    use crate::partition::{build_initial_partition, choose_thresholds, GridSequence, ThresholdOptions};

    fn setup() -> (PiecewiseMap, InitialPartition) {
        let f = make_lorenz_map(0.6).unwrap();
        let g = GridSequence::new(0.3, 0.6).unwrap();
        let t = choose_thresholds(&f, &g, 0.5, &ThresholdOptions::default()).unwrap();
        let p = build_initial_partition(&f, &t, 500).unwrap();
        (f, p)
    }

    /// An atom at level 0 whose image after one step is `[y0, y1]`.
    fn atom_onto(f: &PiecewiseMap, branch: usize, y0: Dd, y1: Dd) -> RefinedAtom {
        let b = &f.branches[branch];
        let (x0, x1) = (b.inverse_dd(y0), b.inverse_dd(y1));
        RefinedAtom {
            lo: x0,
            hi: x1,
            image_lo: x0,
            image_hi: x1,
            path: Vec::new(),
            reversed: false,
            return_times: vec![0],
            return_depths: vec![(0, 0)],
            return_cells: vec![0],
            hosts: Vec::new(),
        }
    }

    #[test]
    fn wide_image_is_free() {
        let (f, p) = setup();
        // Image spans ten cells on the right of 1/2.
        let i = p.cells.iter().position(|c| c.depth == 3 && c.anchors == vec![1]).unwrap();
        let y0 = p.edges[i - 9];
        let y1 = p.edges[i + 1];
        let a = atom_onto(&f, 1, y0.min(y1), y0.max(y1));
        let (kids, _) = refine_step(&[a.clone()], &f, &p);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].return_times, vec![0]);
        assert_eq!((kids[0].lo, kids[0].hi), (a.lo, a.hi));
    }

    #[test]
    fn exact_cell_image_is_one_return() {
        let (f, p) = setup();
        let i = p.cells.iter().position(|c| c.depth == 40 && c.anchors == vec![0]).unwrap();
        let a = atom_onto(&f, 1, p.edges[i], p.edges[i + 1]);
        let (kids, _) = refine_step(&[a], &f, &p);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].return_depths[1], (0, 40));
        assert_eq!((kids[0].image_lo, kids[0].image_hi), (p.edges[i], p.edges[i + 1]));
    }

    #[test]
    fn image_around_one_cell_is_one_return() {
        let (f, p) = setup();
        let i = p.cells.iter().position(|c| c.depth == 7 && c.anchors == vec![1]).unwrap();
        let mid = |k: usize| (p.edges[k] + p.edges[k + 1]) * 0.5;
        let a = atom_onto(&f, 0, mid(i - 1), mid(i + 1));
        let (kids, _) = refine_step(&[a], &f, &p);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].return_times, vec![0, 1]);
        assert_eq!(kids[0].return_depths[1], (1, 7));
        assert!(check_nesting(&f, &p, &kids[0], 1e-10));
    }

    #[test]
    fn strict_fragment_is_merged() {
        let (f, p) = setup();
        // M(c,p) plus part of M(c,p+1) on the right of 1/2.
        let i = p.cells.iter().position(|c| c.depth == 9 && c.anchors == vec![1]).unwrap();
        let j = i - 1; // M(c, p+1) is nearer 1/2, so to the left
        assert_eq!(p.cells[j].depth, 10);
        let mid = (p.edges[j] + p.edges[j + 1]) * 0.5;
        let a = atom_onto(&f, 0, mid, p.edges[i + 1]);
        let (kids, _) = refine_step(&[a], &f, &p);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].return_depths[1].1, 9);
        assert!(check_nesting(&f, &p, &kids[0], 1e-10));
        let (lo, hi) = forward_image(&f, &kids[0], 1);
        assert!(lo < p.edges[i] && hi >= p.edges[i + 1] - dd(1e-25));
    }

    #[test]
    fn mass_is_conserved_over_a_few_levels() {
        let (f, p) = setup();
        let levels = refine_levels(&f, &p, 6);
        for (atoms, over) in &levels {
            let total: f64 = atoms.iter().map(RefinedAtom::len).sum::<f64>() + p.leftover + over.total();
            assert!((total - 1.0).abs() < 1e-8, "{total}");
            for w in atoms.windows(2) {
                assert!(w[0].hi <= w[1].lo);
            }
        }
    }
}
