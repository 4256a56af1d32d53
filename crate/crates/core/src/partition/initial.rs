//! The initial partition `P_0`.

use crate::error::{Error, Result};
use crate::map::PiecewiseMap;
use crate::precise::{self, dd, Dd};

use super::geometry;
use super::thresholds::Thresholds;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AtomKind {
    /// `Δ(c,a_p) \ Δ(c,a_{p+1})` next to a singular point.
    SingularSide,
    /// Preimage of a singular-side atom next to a connected point.
    PulledBack,
    /// Complementary component between grid regions.
    Escape,
    /// Everything deeper than `p_max` next to one point; not an atom.
    Leftover,
}

impl AtomKind {
    pub fn name(self) -> &'static str {
        match self {
            AtomKind::SingularSide => "singular_side",
            AtomKind::PulledBack => "pulled_back",
            AtomKind::Escape => "escape",
            AtomKind::Leftover => "leftover",
        }
    }
}

/// A cell of `P_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub lo: Dd,
    pub hi: Dd,
    /// Map point indices; escape intervals may have two, or none when far
    /// from every boundary point.
    pub anchors: Vec<usize>,
    /// `p`, or `ρ(c)-1` for an escape interval.
    pub depth: usize,
    pub kind: AtomKind,
}

impl Atom {
    pub fn len(&self) -> f64 {
        precise::to_f64(self.hi - self.lo)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// First anchor, or `usize::MAX` for an anchorless escape interval.
    pub fn anchor(&self) -> usize {
        self.anchors.first().copied().unwrap_or(usize::MAX)
    }
}

#[derive(Clone, Debug)]
pub struct InitialPartition {
    /// Cells in increasing order, leftover cells included.
    pub cells: Vec<Atom>,
    /// `cells[i] = [edges[i], edges[i+1]]`.
    pub edges: Vec<Dd>,
    /// Interior branch boundaries, sorted.
    pub breaks: Vec<f64>,
    pub leftover: f64,
    pub p_max: usize,
    pub thresholds: Thresholds,
}

impl InitialPartition {
    /// The atoms proper, without leftover cells.
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.cells.iter().filter(|a| a.kind != AtomKind::Leftover)
    }

    /// Indices of cells whose interior meets `(a, b)`.
    pub fn cells_meeting(&self, a: Dd, b: Dd) -> std::ops::Range<usize> {
        let n = self.cells.len();
        let first = self.edges[1..=n].partition_point(|&e| e <= a);
        let end = self.edges[..n].partition_point(|&e| e < b);
        first..end.max(first)
    }

    /// Index of the cell `M(c,p)`.
    pub fn cell_of(&self, anchor: usize, depth: usize) -> Option<usize> {
        self.cells.iter().position(|a| a.anchor() == anchor && a.depth == depth)
    }

    /// `|M(c,p)^+|` and its ends: the cell with its two neighbours.
    pub fn plus(&self, cell: usize) -> (Dd, Dd) {
        let lo = self.edges[cell.saturating_sub(1)];
        let hi = self.edges[(cell + 2).min(self.cells.len())];
        (lo, hi)
    }

    /// Whether a branch boundary lies strictly inside `(a, b)`.
    pub fn straddles(&self, a: Dd, b: Dd) -> bool {
        let i = self.breaks.partition_point(|&c| dd(c) <= a);
        i < self.breaks.len() && dd(self.breaks[i]) < b
    }

    /// Sum of `|ω|^{1-β₂}` over the atoms, `C₀`.
    pub fn class_constant(&self) -> f64 {
        let e = 1.0 - self.thresholds.beta2;
        self.atoms().map(|a| a.len().powf(e)).sum()
    }

    /// Largest `d(M,D)/|M|^{1/(1+ε₁β₁)}` spread over grid atoms.
    pub fn k2_estimate(&self, map: &PiecewiseMap) -> f64 {
        let q = 1.0 / (1.0 + self.thresholds.grid.eb());
        let mut k2: f64 = 1.0;
        for a in self.atoms().filter(|a| a.kind != AtomKind::Escape) {
            let c = map.points[a.anchor()].location;
            let d = precise::to_f64(precise::min(precise::abs(a.lo - c), precise::abs(a.hi - c)));
            let r = d / a.len().powf(q);
            k2 = k2.max(r).max(1.0 / r);
        }
        k2
    }
}

/// Build `P_0` down to depth `p_max`.
pub fn build_initial_partition(map: &PiecewiseMap, thresholds: &Thresholds, p_max: usize) -> Result<InitialPartition> {
    if p_max < thresholds.theta {
        return Err(Error::InvalidParameters(format!(
            "p_max {p_max} is below the deep-return threshold {}",
            thresholds.theta
        )));
    }
    let seq = &thresholds.grid;
    let mut cells = Vec::new();
    for a in &thresholds.anchors {
        let floor = thresholds.depth_floor(a);
        let kind = if a.singular { AtomKind::SingularSide } else { AtomKind::PulledBack };
        let mut outer = geometry::cut(map, a, seq.value_dd(floor))?;
        for p in floor..=p_max {
            let inner = geometry::cut(map, a, seq.value_dd(p + 1))?;
            let (lo, hi) = if inner < outer { (inner, outer) } else { (outer, inner) };
            cells.push(Atom { lo, hi, anchors: vec![a.point], depth: p, kind });
            outer = inner;
        }
        let c = dd(map.points[a.point].location);
        let (lo, hi) = if outer < c { (outer, c) } else { (c, outer) };
        cells.push(Atom { lo, hi, anchors: vec![a.point], depth: p_max + 1, kind: AtomKind::Leftover });
    }
    cells.sort_by(|x, y| x.lo.partial_cmp(&y.lo).expect("finite"));
    for w in cells.windows(2) {
        if w[1].lo < w[0].hi {
            return Err(Error::InvalidParameters("grid regions of two points overlap".into()));
        }
    }

    // Escape intervals fill the gaps, cut at branch boundaries.
    let breaks: Vec<f64> = map.branches[..map.branches.len() - 1].iter().map(|b| b.hi).collect();
    let mut gaps = Vec::new();
    let mut at = dd(0.0);
    for c in &cells {
        if at < c.lo {
            gaps.push((at, c.lo));
        }
        at = c.hi;
    }
    if at < dd(1.0) {
        gaps.push((at, dd(1.0)));
    }
    let mut escapes = Vec::new();
    for (lo, hi) in gaps {
        let mut cuts = vec![lo];
        cuts.extend(breaks.iter().map(|&b| dd(b)).filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        for w in cuts.windows(2) {
            escapes.push(escape_atom(map, thresholds, w[0], w[1]));
        }
    }
    cells.extend(escapes);
    cells.sort_by(|x, y| x.lo.partial_cmp(&y.lo).expect("finite"));

    let mut edges = Vec::with_capacity(cells.len() + 1);
    edges.push(dd(0.0));
    for c in &cells {
        if c.lo != *edges.last().expect("nonempty") {
            return Err(Error::InvalidParameters("initial partition leaves a gap".into()));
        }
        edges.push(c.hi);
    }
    let leftover = cells.iter().filter(|c| c.kind == AtomKind::Leftover).map(Atom::len).sum();
    Ok(InitialPartition {
        cells,
        edges,
        breaks,
        leftover,
        p_max,
        thresholds: thresholds.clone(),
    })
}

/// Escape interval on `[lo, hi]`, anchored at the points whose one-sided
/// neighbourhood it meets.
fn escape_atom(map: &PiecewiseMap, t: &Thresholds, lo: Dd, hi: Dd) -> Atom {
    let (l, h) = (precise::to_f64(lo), precise::to_f64(hi));
    let mut anchors = Vec::new();
    for a in &t.anchors {
        let c = &map.points[a.point];
        let (nlo, nhi) = match c.side {
            crate::map::Side::Plus => (c.location, c.location + c.half_gap),
            crate::map::Side::Minus => (c.location - c.half_gap, c.location),
        };
        if l < nhi && h > nlo {
            anchors.push(a.point);
        }
    }
    let depth = anchors
        .first()
        .map(|&p| t.rho[p].unwrap_or(t.rho0) - 1)
        .unwrap_or(0);
    Atom { lo, hi, anchors, depth, kind: AtomKind::Escape }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{make_connected_map, make_lorenz_map};
    use crate::partition::{choose_thresholds, GridSequence, ThresholdOptions};

    fn lorenz(p_max: usize) -> (PiecewiseMap, InitialPartition) {
        let f = make_lorenz_map(0.6).unwrap();
        let g = GridSequence::new(0.3, 0.6).unwrap();
        let t = choose_thresholds(&f, &g, 0.5, &ThresholdOptions::default()).unwrap();
        let p = build_initial_partition(&f, &t, p_max).unwrap();
        (f, p)
    }

    #[test]
    fn singular_atoms_match_grid_gaps() {
        let (_, p) = lorenz(500);
        let g = p.thresholds.grid;
        for a in p.atoms().filter(|a| a.kind == AtomKind::SingularSide) {
            let want = g.gap(a.depth);
            assert!((a.len() - want).abs() <= 1e-12 * want, "p={}", a.depth);
        }
    }

    #[test]
    fn coverage_and_disjointness() {
        for (_, p) in [lorenz(500), lorenz(1000)] {
            let total: f64 = p.atoms().map(Atom::len).sum::<f64>() + p.leftover;
            assert!((total - 1.0).abs() < 1e-9);
            for w in p.cells.windows(2) {
                assert_eq!(w[0].hi, w[1].lo);
            }
            // Lorenz: two escape intervals, one per branch.
            assert_eq!(p.atoms().filter(|a| a.kind == AtomKind::Escape).count(), 2);
        }
    }

    #[test]
    fn k2_is_stable_in_p_max() {
        let (f, a) = lorenz(1000);
        let (_, b) = lorenz(10_000);
        let (ka, kb) = (a.k2_estimate(&f), b.k2_estimate(&f));
        assert!(ka.is_finite() && (ka - kb).abs() / kb < 0.05, "{ka} {kb}");
    }

    #[test]
    fn connected_map_partition_covers() {
        let f = make_connected_map(0.6, 1).unwrap();
        let g = GridSequence::new(0.3, 0.6).unwrap();
        let t = choose_thresholds(&f, &g, 0.5, &ThresholdOptions::default()).unwrap();
        let p = build_initial_partition(&f, &t, t.theta + 50).unwrap();
        let total: f64 = p.atoms().map(Atom::len).sum::<f64>() + p.leftover;
        assert!((total - 1.0).abs() < 1e-9);
        assert!(p.atoms().any(|a| a.kind == AtomKind::PulledBack));
        // The escape interval between the discontinuity and the singularity
        // is shared by both.
        assert!(p.atoms().any(|a| a.kind == AtomKind::Escape && a.anchors.len() == 2));
    }

    #[test]
    fn p_max_below_theta_is_rejected() {
        let f = make_lorenz_map(0.6).unwrap();
        let g = GridSequence::new(0.3, 0.6).unwrap();
        let t = choose_thresholds(&f, &g, 0.5, &ThresholdOptions::default()).unwrap();
        assert!(build_initial_partition(&f, &t, t.theta - 1).is_err());
    }

    #[test]
    fn cell_lookup() {
        let (_, p) = lorenz(500);
        let n = p.cells.len();
        assert_eq!(p.cells_meeting(dd(0.0), dd(1.0)), 0..n);
        let a = p.edges[3];
        let b = p.edges[5];
        assert_eq!(p.cells_meeting(a, b), 3..5);
        assert!(p.straddles(dd(0.4), dd(0.6)));
        assert!(!p.straddles(dd(0.5), dd(0.6)));
    }
}
