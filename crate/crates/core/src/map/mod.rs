//! Piecewise expanding interval maps with one-sided singular and
//! discontinuity points.

mod branch;
pub mod families;
pub mod record;
pub mod validate;

pub use branch::{Branch, BranchKind, End, Monotone};
pub use families::{make_connected_map, make_doubling_map, make_lorenz_map};
pub use record::{BranchRecord, MapRecord, PointRecord};
pub use validate::{validate_map, ValidationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precise::{dd, Dd};

/// Default tolerance for deciding that a point sits on the boundary set.
pub const DEFAULT_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Neighbourhoods `(c, c + r)`.
    Plus,
    /// Neighbourhoods `(c - r, c)`.
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Route from a discontinuity to a singular point.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    pub steps: usize,
    /// Index of the target point in the map's point list.
    pub target: usize,
    /// Nearest boundary point to the intermediate images, `0 < j < steps`.
    pub itinerary: Vec<usize>,
    /// Branch used at each of the `steps` iterates.
    pub branch_path: Vec<usize>,
    /// Half-width of the neighbourhood on which the composition is a
    /// diffeomorphism into the target's neighbourhood.
    pub reach: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneSidedPoint {
    pub location: f64,
    pub side: Side,
    pub order: f64,
    pub comparability: f64,
    pub half_gap: f64,
    pub connection: Option<Connection>,
    /// Branch boundary across which the map is continuous (circle maps);
    /// ignored by distances and holes.
    pub removable: bool,
}

impl OneSidedPoint {
    pub fn is_singular(&self) -> bool {
        self.order < 1.0
    }

    /// Point at signed offset `r` into the one-sided neighbourhood.
    pub fn offset(&self, r: f64) -> f64 {
        self.location + self.side.sign() * r
    }

    pub fn offset_dd(&self, r: Dd) -> Dd {
        match self.side {
            Side::Plus => r + self.location,
            Side::Minus => dd(self.location) - r,
        }
    }

    pub fn label(&self) -> String {
        let s = match self.side {
            Side::Plus => "+",
            Side::Minus => "-",
        };
        format!("{}{}", self.location, s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationParams {
    pub delta: f64,
}

impl TruncationParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::InvalidParameters(format!(
                "truncation delta {delta} outside (0, 1/2)"
            )));
        }
        Ok(TruncationParams { delta })
    }
}

/// `d_δ` as a function of the plain distance `d`.
pub fn truncate(d: f64, delta: f64) -> f64 {
    if d <= delta {
        d
    } else if d < 2.0 * delta {
        (1.0 - delta) / delta * d + 2.0 * delta - 1.0
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseMap {
    pub branches: Vec<Branch>,
    pub points: Vec<OneSidedPoint>,
    pub sigma: f64,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub tolerance: f64,
    /// Distinct locations of the non-removable points, sorted.
    hole_locations: Vec<f64>,
    /// Distinct locations of all points, sorted.
    all_locations: Vec<f64>,
}

impl PiecewiseMap {
    /// Build a map; connections are completed with their itinerary, branch
    /// path and reach.
    pub fn new(branches: Vec<Branch>, points: Vec<OneSidedPoint>, tolerance: f64) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidParameters("map has no branches".into()));
        }
        if branches[0].lo != 0.0 || branches[branches.len() - 1].hi != 1.0 {
            return Err(Error::InvalidParameters("branches must cover [0,1]".into()));
        }
        for w in branches.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::InvalidParameters(format!(
                    "branch domains do not abut at {} / {}",
                    w[0].hi, w[1].lo
                )));
            }
        }
        if !(tolerance > 0.0 && tolerance < 1e-3) {
            return Err(Error::InvalidParameters(format!("tolerance {tolerance}")));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p.location) {
                return Err(Error::InvalidParameters(format!("point {} outside [0,1]", p.location)));
            }
            if !(p.order > 0.0 && p.order <= 1.0) {
                return Err(Error::InvalidParameters(format!("order {} outside (0,1]", p.order)));
            }
            if !(p.half_gap > 0.0) || p.comparability < 1.0 {
                return Err(Error::InvalidParameters(format!(
                    "point {} needs half_gap > 0 and comparability >= 1",
                    p.label()
                )));
            }
            if p.is_singular() && p.removable {
                return Err(Error::InvalidParameters("a singular point cannot be removable".into()));
            }
        }
        for b in &branches[1..] {
            if !points.iter().any(|p| p.location == b.lo) {
                return Err(Error::InvalidParameters(format!(
                    "branch boundary {} is not a boundary point",
                    b.lo
                )));
            }
        }
        let sigma = branches.iter().map(Branch::min_slope).fold(f64::INFINITY, f64::min);
        let orders: Vec<f64> = points.iter().filter(|p| p.is_singular()).map(|p| p.order).collect();
        let beta0 = orders.iter().copied().reduce(f64::min);
        let beta1 = orders.iter().copied().reduce(f64::max);
        let mut hole_locations: Vec<f64> =
            points.iter().filter(|p| !p.removable).map(|p| p.location).collect();
        hole_locations.sort_by(f64::total_cmp);
        hole_locations.dedup();
        let mut all_locations: Vec<f64> = points.iter().map(|p| p.location).collect();
        all_locations.sort_by(f64::total_cmp);
        all_locations.dedup();
        let mut map = PiecewiseMap {
            branches,
            points,
            sigma,
            beta0,
            beta1,
            tolerance,
            hole_locations,
            all_locations,
        };
        for i in 0..map.points.len() {
            if let Some(conn) = map.points[i].connection.clone() {
                let completed = families::complete_connection(&map, i, conn.steps, conn.target)?;
                map.points[i].connection = Some(completed);
            }
        }
        Ok(map)
    }

    pub fn singular_points(&self) -> impl Iterator<Item = (usize, &OneSidedPoint)> {
        self.points.iter().enumerate().filter(|(_, p)| p.is_singular())
    }

    pub fn discontinuity_points(&self) -> impl Iterator<Item = (usize, &OneSidedPoint)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_singular() && !p.removable)
    }

    /// Number of one-sided points that count towards holes and distances.
    pub fn hole_point_count(&self) -> usize {
        self.points.iter().filter(|p| !p.removable).count()
    }

    pub fn hole_locations(&self) -> &[f64] {
        &self.hole_locations
    }

    /// Longest connection, `T_0`.
    pub fn max_connection_steps(&self) -> usize {
        self.points
            .iter()
            .filter_map(|p| p.connection.as_ref().map(|c| c.steps))
            .max()
            .unwrap_or(1)
    }

    /// Index of the branch whose open domain contains `x`.
    pub fn branch_index(&self, x: f64) -> Option<usize> {
        if x == 0.0 {
            return Some(0);
        }
        if x == 1.0 {
            return Some(self.branches.len() - 1);
        }
        let i = self.branches.partition_point(|b| b.lo < x);
        if i == 0 {
            return None;
        }
        let b = &self.branches[i - 1];
        b.contains(x).then_some(i - 1)
    }

    pub fn branch_index_dd(&self, x: Dd) -> Option<usize> {
        let i = self.branches.partition_point(|b| x > b.lo);
        if i == 0 {
            return None;
        }
        let b = &self.branches[i - 1];
        (x < b.hi).then_some(i - 1)
    }

    /// Branch adjacent to a one-sided point on its side.
    pub fn branch_at(&self, point: &OneSidedPoint) -> Option<usize> {
        let probe = point.offset(1e-9_f64.min(point.half_gap * 1e-3));
        self.branch_index(probe)
    }

    fn near_boundary(&self, x: f64) -> bool {
        let i = self.all_locations.partition_point(|&c| c < x);
        let mut d = f64::INFINITY;
        if i < self.all_locations.len() {
            d = d.min(self.all_locations[i] - x);
        }
        if i > 0 {
            d = d.min(x - self.all_locations[i - 1]);
        }
        d <= self.tolerance
    }

    fn checked_branch(&self, x: f64) -> Result<&Branch> {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(Error::InvalidParameters(format!("{x} is outside [0,1]")));
        }
        if self.near_boundary(x) {
            return Err(Error::SingularPoint { x, tolerance: self.tolerance });
        }
        self.branch_index(x)
            .map(|i| &self.branches[i])
            .ok_or(Error::SingularPoint { x, tolerance: self.tolerance })
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        Ok(self.checked_branch(x)?.eval(x))
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        Ok(self.checked_branch(x)?.derivative(x))
    }

    /// Distance from `x` to the (non-removable) boundary set.
    pub fn distance_to_set(&self, x: f64) -> f64 {
        let locs = &self.hole_locations;
        if locs.is_empty() {
            return f64::INFINITY;
        }
        let i = locs.partition_point(|&c| c < x);
        let mut d = f64::INFINITY;
        if i < locs.len() {
            d = d.min(locs[i] - x);
        }
        if i > 0 {
            d = d.min(x - locs[i - 1]);
        }
        d
    }

    pub fn distance_to_set_dd(&self, x: Dd) -> Dd {
        let mut best = dd(f64::INFINITY);
        for &c in &self.hole_locations {
            let d = crate::precise::abs(x - c);
            if d < best {
                best = d;
            }
        }
        best
    }

    pub fn truncated_distance(&self, x: f64, params: TruncationParams) -> f64 {
        truncate(self.distance_to_set(x), params.delta)
    }

    /// `Δ_δ(x) = |log d_δ(x)|`.
    pub fn recurrence_observable(&self, x: f64, params: TruncationParams) -> Result<f64> {
        let d = self.truncated_distance(x, params);
        if d <= 0.0 {
            return Err(Error::InfiniteRecurrence { x });
        }
        Ok(-d.ln())
    }

    /// `Σ_{j<n} g(f^j x)`, failing at the first iterate that meets the
    /// boundary set.
    pub fn birkhoff_sum<G: Fn(f64) -> f64>(&self, g: G, x: f64, n: usize) -> Result<f64> {
        let mut sum = 0.0;
        let mut x = x;
        for j in 0..n {
            let b = self
                .checked_branch(x)
                .map_err(|_| Error::OrbitHitSingular { index: j })?;
            sum += g(x);
            if j + 1 < n {
                x = b.eval(x);
            }
        }
        Ok(sum)
    }

    /// `f^n(x)` or the index of the iterate that hit the boundary set.
    pub fn iterate(&self, x: f64, n: usize) -> Result<f64> {
        let mut x = x;
        for j in 0..n {
            x = self
                .evaluate(x)
                .map_err(|_| Error::OrbitHitSingular { index: j })?;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> PiecewiseMap {
        make_doubling_map()
    }

    #[test]
    fn doubling_evaluations() {
        let f = doubling();
        assert!((f.evaluate(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(f.evaluate(0.75).unwrap(), 0.5);
        assert_eq!(f.derivative(0.123).unwrap(), 2.0);
        assert!(matches!(f.evaluate(0.5), Err(Error::SingularPoint { .. })));
        assert!(matches!(f.evaluate(1e-15), Err(Error::SingularPoint { .. })));
    }

    #[test]
    fn lorenz_endpoint_maps_to_endpoint() {
        let f = make_lorenz_map(0.6).unwrap();
        assert_eq!(f.evaluate(1.0).unwrap(), 1.0);
    }

    #[test]
    fn lorenz_derivative_blows_up_monotonically() {
        let f = make_lorenz_map(0.6).unwrap();
        let mut last = 0.0;
        for k in 3..=10 {
            let d = f.derivative(0.5 + 10f64.powi(-k)).unwrap();
            assert!(d > last);
            last = d;
        }
    }

    #[test]
    fn truncated_distance_cases() {
        let p = TruncationParams::new(0.1).unwrap();
        assert_eq!(truncate(0.05, 0.1), 0.05);
        assert!((truncate(0.15, 0.1) - 0.55).abs() < 1e-15);
        assert_eq!(truncate(0.5, 0.1), 1.0);
        let f = doubling();
        assert_eq!(f.truncated_distance(0.05, p), 0.05);
        assert!((f.recurrence_observable(0.05, p).unwrap() - 2.995732273553991).abs() < 1e-12);
        assert_eq!(f.recurrence_observable(0.5, p).unwrap(), 0.0);
        assert!(matches!(f.recurrence_observable(0.0, p), Err(Error::InfiniteRecurrence { .. })));
    }

    #[test]
    fn truncated_distance_is_continuous() {
        let delta = 0.013;
        let mut max_jump: f64 = 0.0;
        let n = 100_000;
        let mut prev = truncate(0.0, delta);
        for i in 1..=n {
            let d = 0.5 * i as f64 / n as f64;
            let v = truncate(d, delta);
            max_jump = max_jump.max((v - prev).abs());
            prev = v;
        }
        // Largest slope is (1 - δ)/δ over a grid step of 5e-6.
        assert!(max_jump <= (1.0 - delta) / delta * 0.5 / n as f64 + 1e-9);
        let eps = 1e-13;
        assert!((truncate(delta - eps, delta) - truncate(delta + eps, delta)).abs() < 1e-9);
        assert!((truncate(2.0 * delta - eps, delta) - truncate(2.0 * delta + eps, delta)).abs() < 1e-9);
    }

    #[test]
    fn birkhoff_examples() {
        let f = doubling();
        assert_eq!(f.birkhoff_sum(|_| 1.0, 0.3, 7).unwrap(), 7.0);
        let s = f.birkhoff_sum(|x| x, 1.0 / 7.0, 3).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        let p = TruncationParams::new(0.1).unwrap();
        let s = f.birkhoff_sum(|x| f.recurrence_observable(x, p).unwrap(), 0.3, 2).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(f.birkhoff_sum(|x| x, 0.25, 3), Err(Error::OrbitHitSingular { index: 1 }));
    }

    #[test]
    fn birkhoff_is_additive() {
        let f = make_lorenz_map(0.6).unwrap();
        let n = 200;
        for k in 0..50 {
            let x = 0.013 + 0.0197 * k as f64;
            let a = f.birkhoff_sum(|t| t.sin(), x, n).unwrap();
            let b = f.birkhoff_sum(|t| t * t, x, n).unwrap();
            let ab = f.birkhoff_sum(|t| t.sin() + t * t, x, n).unwrap();
            assert!((a + b - ab).abs() <= n as f64 * 1e-12);
        }
    }

    #[test]
    fn derivative_matches_centered_differences() {
        use rand::{Rng, SeedableRng};
        let f = make_lorenz_map(0.6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        let mut checked = 0;
        while checked < 10_000 {
            let x: f64 = rng.gen();
            if f.distance_to_set(x) < 1e3 * h || x < h || x > 1.0 - h {
                continue;
            }
            let fd = (f.evaluate(x + h).unwrap() - f.evaluate(x - h).unwrap()) / (2.0 * h);
            let d = f.derivative(x).unwrap();
            // The second derivative scales like dist^{a-2}; near the
            // singularity it is the dominant constant.
            let c = 10.0 * f.distance_to_set(x).powf(0.6 - 2.0);
            assert!((d - fd).abs() <= c * h.powf(0.6), "x={x}");
            checked += 1;
        }
    }
}
