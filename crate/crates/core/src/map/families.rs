//! Bundled test maps and the connection bookkeeping shared with custom maps.

use super::{Branch, BranchKind, Connection, End, OneSidedPoint, PiecewiseMap, Side, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::precise::{self, dd, Dd};

/// Grid points used when checking a connection neighbourhood.
const CONNECTION_GRID: usize = 1000;

/// Weight of the power part for a given exponent: keeps the slope at the
/// regular end at 0.6 of the secant slope, so full branches expand by 1.2.
pub fn power_weight(alpha: f64) -> f64 {
    (0.4 / (1.0 - alpha)).min(1.0)
}

fn profile_kind(alpha: f64) -> BranchKind {
    let w = power_weight(alpha);
    if w >= 1.0 {
        BranchKind::Power { exponent: alpha }
    } else {
        BranchKind::PowerAffine { exponent: alpha, weight: w }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("order {alpha} outside (0,1)")))
    }
}

pub(crate) fn point(location: f64, side: Side, order: f64, half_gap: f64) -> OneSidedPoint {
    OneSidedPoint {
        location,
        side,
        order,
        comparability: 1.0,
        half_gap,
        connection: None,
        removable: false,
    }
}

fn connect(mut p: OneSidedPoint, steps: usize, target: usize) -> OneSidedPoint {
    p.connection = Some(Connection {
        steps,
        target,
        itinerary: Vec::new(),
        branch_path: Vec::new(),
        reach: 0.0,
    });
    p
}

/// `x ↦ 2x mod 1`, with holes only at `0 ≡ 1`.
pub fn make_doubling_map() -> PiecewiseMap {
    let branches = vec![
        Branch::new(0.0, 0.5, 0.0, 1.0, BranchKind::Affine, End::Lo).expect("static branch"),
        Branch::new(0.5, 1.0, 0.0, 1.0, BranchKind::Affine, End::Lo).expect("static branch"),
    ];
    let mut half_minus = point(0.5, Side::Minus, 1.0, 0.25);
    let mut half_plus = point(0.5, Side::Plus, 1.0, 0.25);
    half_minus.removable = true;
    half_plus.removable = true;
    let points = vec![
        point(0.0, Side::Plus, 1.0, 0.25),
        half_minus,
        half_plus,
        point(1.0, Side::Minus, 1.0, 0.25),
    ];
    let map = PiecewiseMap::new(branches, points, DEFAULT_TOLERANCE).expect("static map");
    with_measured_constants(map).expect("static map")
}

/// Two full branches meeting at a singularity of order `alpha` at 1/2.
pub fn make_lorenz_map(alpha: f64) -> Result<PiecewiseMap> {
    check_alpha(alpha)?;
    let kind = profile_kind(alpha);
    let branches = vec![
        Branch::new(0.0, 0.5, 0.0, 1.0, kind, End::Hi)?,
        Branch::new(0.5, 1.0, 0.0, 1.0, kind, End::Lo)?,
    ];
    let points = vec![
        point(0.5, Side::Minus, alpha, 0.25),
        point(0.5, Side::Plus, alpha, 0.25),
    ];
    let map = PiecewiseMap::new(branches, points, DEFAULT_TOLERANCE)?;
    with_measured_constants(map)
}

/// Location of the singularity in the connected family.
pub const CONNECTED_SINGULARITY: f64 = 0.475;
/// Location of the discontinuity in the connected family.
pub const CONNECTED_DISCONTINUITY: f64 = 0.25;

/// Three branches: a discontinuity at 0.25 whose left side reaches the
/// singularity at 0.475 in `steps` iterates and whose right side reaches it
/// in one.
pub fn make_connected_map(alpha: f64, steps: usize) -> Result<PiecewiseMap> {
    check_alpha(alpha)?;
    if !(1..=2).contains(&steps) {
        return Err(Error::InvalidParameters(format!("connection steps {steps} not in {{1,2}}")));
    }
    let s = CONNECTED_SINGULARITY;
    let d = CONNECTED_DISCONTINUITY;
    let kind = profile_kind(alpha);
    let right = Branch::new(s, 1.0, 0.0, 1.0, kind, End::Lo)?;
    let left_end = if steps == 1 { s } else { right.inverse(s) };
    let branches = vec![
        Branch::new(0.0, d, 0.0, left_end, BranchKind::Affine, End::Lo)?,
        Branch::new(d, s, s, 1.0, kind, End::Hi)?,
        right,
    ];
    let gap = 0.5 * (s - d);
    let points = vec![
        connect(point(d, Side::Minus, 1.0, 0.5 * d), steps, 2),
        connect(point(d, Side::Plus, 1.0, gap), 1, 3),
        point(s, Side::Minus, alpha, gap),
        point(s, Side::Plus, alpha, 0.5 * (1.0 - s)),
    ];
    let map = PiecewiseMap::new(branches, points, DEFAULT_TOLERANCE)?;
    with_measured_constants(map)
}

/// Replace comparability and Hölder constants by measured values with a
/// small safety margin.
pub(crate) fn with_measured_constants(map: PiecewiseMap) -> Result<PiecewiseMap> {
    let mut branches = map.branches.clone();
    let mut points = map.points.clone();
    for p in points.iter_mut() {
        if let Some(b) = map.branch_at(p) {
            p.comparability = 1.01 * super::validate::comparability_estimate(&map.branches[b], p);
        }
    }
    for (i, p) in map.discontinuity_points() {
        if let Some(b) = map.branch_at(p) {
            let h = super::validate::holder_estimate(&map, i, map.branches[b].holder_exponent);
            let declared = &mut branches[b].holder_constant;
            *declared = declared.max(1.25 * h);
        }
    }
    PiecewiseMap::new(branches, points, map.tolerance)
}

/// Nearest non-removable point to `y`, preferring the one whose side faces
/// `y`.
fn nearest_point(map: &PiecewiseMap, y: f64) -> Option<usize> {
    let mut best: Option<((f64, bool), usize)> = None;
    for (i, p) in map.points.iter().enumerate() {
        if p.removable {
            continue;
        }
        let away = (y - p.location) * p.side.sign() < 0.0;
        let key = ((y - p.location).abs(), away);
        if best.map_or(true, |(bk, _)| key < bk) {
            best = Some((key, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Fill in the itinerary, branch path and reach of a declared connection.
pub(crate) fn complete_connection(
    map: &PiecewiseMap,
    index: usize,
    steps: usize,
    target: usize,
) -> Result<Connection> {
    let c = &map.points[index];
    let bad = |why: String| Error::InvalidParameters(format!("connection from {}: {why}", c.label()));
    if steps == 0 {
        return Err(bad("zero steps".into()));
    }
    let tp = map.points.get(target).ok_or_else(|| bad(format!("target {target} does not exist")))?;
    if !tp.is_singular() {
        return Err(bad("target is not a singular point".into()));
    }
    let probe = 1e-10_f64.min(c.half_gap * 1e-4);
    let mut x = dd(c.offset(0.0)) + c.side.sign() * probe;
    let mut branch_path = Vec::with_capacity(steps);
    let mut itinerary = Vec::new();
    for j in 0..steps {
        let b = map
            .branch_index_dd(x)
            .ok_or_else(|| bad(format!("iterate {j} leaves the branch domains")))?;
        branch_path.push(b);
        x = map.branches[b].eval_dd(x);
        if j + 1 < steps {
            let y = precise::to_f64(x);
            itinerary.push(nearest_point(map, y).ok_or_else(|| bad("no boundary points".into()))?);
        }
    }
    let end = precise::to_f64(x);
    if (end - tp.location).abs() > 1e-6 || (end - tp.location) * tp.side.sign() <= 0.0 {
        return Err(bad(format!("limit image {end} is not on {}", tp.label())));
    }
    let reach = connection_reach(map, c, &branch_path, tp)
        .ok_or_else(|| bad("no neighbourhood maps diffeomorphically onto the target side".into()))?;
    Ok(Connection {
        steps,
        target,
        itinerary,
        branch_path,
        reach,
    })
}

/// Map `x` along a fixed branch path, failing if it strays.
pub(crate) fn follow_path(map: &PiecewiseMap, x: Dd, path: &[usize]) -> Option<Dd> {
    let mut x = x;
    for &b in path {
        if map.branch_index_dd(x) != Some(b) {
            return None;
        }
        x = map.branches[b].eval_dd(x);
    }
    Some(x)
}

/// Largest `r = half_gap / 2^k` such that a grid in `Δ(c, r)` follows the
/// branch path and lands monotonically on the target side within its gap.
fn connection_reach(map: &PiecewiseMap, c: &OneSidedPoint, path: &[usize], tp: &OneSidedPoint) -> Option<f64> {
    'scale: for k in 0..60 {
        let r = c.half_gap / 2f64.powi(k);
        let mut prev: Option<f64> = None;
        let mut direction = 0.0;
        for i in 1..=CONNECTION_GRID {
            let x = c.offset_dd(dd(r * i as f64 / CONNECTION_GRID as f64));
            let Some(y) = follow_path(map, x, path) else { continue 'scale };
            let off = (precise::to_f64(y) - tp.location) * tp.side.sign();
            if !(off > 0.0 && off < tp.half_gap) {
                continue 'scale;
            }
            if let Some(p) = prev {
                let step = off - p;
                if step == 0.0 || (direction != 0.0 && step.signum() != direction) {
                    continue 'scale;
                }
                direction = step.signum();
            }
            prev = Some(off);
        }
        return Some(r);
    }
    None
}

/// `f^T(x)` along a branch path, without domain checks.
pub fn pull_forward_dd(map: &PiecewiseMap, path: &[usize], x: Dd) -> Dd {
    path.iter().fold(x, |x, &b| map.branches[b].eval_dd(x))
}

/// `(f^T|Δ(c, reach))^{-1}(y)` along the stored branch path.
pub fn pull_back_dd(map: &PiecewiseMap, path: &[usize], y: Dd) -> Dd {
    let mut y = y;
    for &b in path.iter().rev() {
        y = map.branches[b].inverse_dd(y);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_orders_and_expansion() {
        let f = make_lorenz_map(0.6).unwrap();
        assert!(f.points.iter().all(|p| p.order == 0.6));
        assert!((f.sigma - 1.2).abs() < 1e-12);
        assert_eq!(f.beta1, Some(0.6));
        for &a in &[0.2, 0.5, 0.9] {
            assert!(make_lorenz_map(a).unwrap().sigma > 1.0);
        }
        assert!(make_lorenz_map(1.0).is_err());
    }

    #[test]
    fn doubling_has_no_singular_points() {
        let f = make_doubling_map();
        assert_eq!(f.sigma, 2.0);
        assert_eq!(f.singular_points().count(), 0);
        assert_eq!(f.hole_locations(), &[0.0, 1.0]);
    }

    #[test]
    fn connected_map_reaches_singularity() {
        for steps in [1, 2] {
            let f = make_connected_map(0.6, steps).unwrap();
            assert!(f.sigma > 1.0);
            assert!(f.branches.len() >= 3);
            let c = f.points[0].connection.as_ref().unwrap();
            assert_eq!(c.steps, steps);
            assert_eq!(c.branch_path.len(), steps);
            assert_eq!(c.itinerary.len(), steps - 1);
            assert!(c.reach > 0.0);
            // 1e3 grid points of the neighbourhood land on the left of the
            // singularity.
            let target = &f.points[c.target];
            for i in 1..=1000 {
                let x = f.points[0].offset(c.reach * i as f64 / 1000.0);
                let y = f.iterate(x, steps).unwrap();
                assert!(y < target.location && y > target.location - target.half_gap);
            }
        }
        assert!(make_connected_map(0.6, 3).is_err());
    }

    #[test]
    fn pull_back_inverts_the_connection() {
        let f = make_connected_map(0.6, 2).unwrap();
        let c = f.points[0].connection.as_ref().unwrap();
        let x = f.points[0].offset_dd(dd(c.reach * 0.3));
        let y = follow_path(&f, x, &c.branch_path).unwrap();
        let back = pull_back_dd(&f, &c.branch_path, y);
        assert!(precise::to_f64(precise::abs(back - x)) < 1e-28);
    }
}
