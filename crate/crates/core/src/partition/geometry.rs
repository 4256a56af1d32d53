//! Where the grid atoms of each boundary point sit in `[0,1]`.

use crate::error::{Error, Result};
use crate::map::families::pull_back_dd;
use crate::map::{OneSidedPoint, PiecewiseMap};
use crate::precise::{self, dd, Dd};

use super::grid::GridSequence;

/// A boundary point that carries grid atoms.
#[derive(Clone, Debug)]
pub struct Anchor {
    /// Index into the map's point list.
    pub point: usize,
    pub singular: bool,
    /// Singular point reached by the connection.
    pub target: Option<usize>,
    pub path: Vec<usize>,
}

pub fn anchors(map: &PiecewiseMap) -> Result<Vec<Anchor>> {
    let mut out = Vec::new();
    for (i, p) in map.points.iter().enumerate() {
        if p.removable {
            continue;
        }
        if p.is_singular() {
            out.push(Anchor { point: i, singular: true, target: None, path: Vec::new() });
        } else {
            let c = p.connection.as_ref().ok_or_else(|| {
                Error::InvalidParameters(format!("discontinuity {} has no connection", p.label()))
            })?;
            out.push(Anchor {
                point: i,
                singular: false,
                target: Some(c.target),
                path: c.branch_path.clone(),
            });
        }
    }
    if !out.iter().any(|a| a.singular) {
        return Err(Error::InvalidParameters("the partition needs at least one singular point".into()));
    }
    Ok(out)
}

/// Grid cut at radius `r` around an anchor, as a position in `[0,1]`.
///
/// For a singular anchor this is `c ± r`; for a connected one it is the
/// preimage of the target's cut under the connecting branch path.
pub fn cut(map: &PiecewiseMap, anchor: &Anchor, r: Dd) -> Result<Dd> {
    let c = &map.points[anchor.point];
    if anchor.singular {
        return Ok(c.offset_dd(r));
    }
    let t = &map.points[anchor.target.expect("connected anchor")];
    let y = t.offset_dd(r);
    // The f64 branch data only reach the target up to rounding, so cuts are
    // measured from the preimage of the target itself.
    let base = pull_back_dd(map, &anchor.path, dd(t.location));
    let x = pull_back_dd(map, &anchor.path, y) - base + c.location;
    let off = precise::to_f64(x - c.location) * c.side.sign();
    if !(off > 0.0 && off <= c.half_gap) || !x.hi().is_finite() {
        return Err(Error::PullbackFailure { target: precise::to_f64(y) });
    }
    Ok(x)
}

/// Distance from the anchor to its cut at radius `r`.
pub fn cut_offset(map: &PiecewiseMap, anchor: &Anchor, r: Dd) -> Result<Dd> {
    let c = &map.points[anchor.point];
    let x = cut(map, anchor, r)?;
    Ok(precise::abs(x - c.location))
}

/// `M(c,p)` as an ordered pair of positions.
pub fn atom_interval(map: &PiecewiseMap, seq: &GridSequence, anchor: &Anchor, p: usize) -> Result<(Dd, Dd)> {
    let near = cut(map, anchor, seq.value_dd(p + 1))?;
    let far = cut(map, anchor, seq.value_dd(p))?;
    Ok(if near < far { (near, far) } else { (far, near) })
}

/// `|M(c,p)|`, computed without cancellation for singular anchors.
pub fn atom_length(map: &PiecewiseMap, seq: &GridSequence, anchor: &Anchor, p: usize) -> Result<f64> {
    if anchor.singular {
        return Ok(seq.gap(p));
    }
    let (lo, hi) = atom_interval(map, seq, anchor, p)?;
    Ok(precise::to_f64(hi - lo))
}

/// `d(M(c,p), D)`: the near end of the atom is closest to its anchor.
pub fn atom_distance(map: &PiecewiseMap, seq: &GridSequence, anchor: &Anchor, p: usize) -> Result<f64> {
    if anchor.singular {
        return Ok(seq.value(p + 1));
    }
    Ok(precise::to_f64(cut_offset(map, anchor, seq.value_dd(p + 1))?))
}

/// One-sided limit of `f^j` at a connected point, `0 <= j <= steps`.
pub fn connection_orbit(map: &PiecewiseMap, c: &OneSidedPoint) -> Vec<f64> {
    let mut out = vec![c.location];
    if let Some(conn) = &c.connection {
        let mut x = dd(c.location);
        for &b in &conn.branch_path {
            x = map.branches[b].eval_dd(x);
            out.push(precise::to_f64(x));
        }
    }
    out
}
