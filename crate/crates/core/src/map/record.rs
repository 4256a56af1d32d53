//! Plain-data description of a map, as read from a config file.

use serde::{Deserialize, Serialize};

use super::{Branch, BranchKind, Connection, End, OneSidedPoint, PiecewiseMap, Side, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchRecord {
    pub domain_lo: f64,
    pub domain_hi: f64,
    /// `affine`, `power` or `power_affine`.
    pub kind: String,
    /// `[image_at_lo, image_at_hi]`, then the exponent, then the weight.
    pub parameters: Vec<f64>,
    #[serde(default)]
    pub singular_end: Option<End>,
    #[serde(default)]
    pub holder_exponent: Option<f64>,
    #[serde(default)]
    pub holder_constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRecord {
    pub location: f64,
    pub side: Side,
    pub order: f64,
    pub half_gap: f64,
    #[serde(default)]
    pub comparability: Option<f64>,
    #[serde(default)]
    pub connection_steps: Option<usize>,
    /// Index of the target in the point list.
    #[serde(default)]
    pub connection_target: Option<usize>,
    #[serde(default)]
    pub removable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRecord {
    pub branch: Vec<BranchRecord>,
    pub point: Vec<PointRecord>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn kind_of(r: &BranchRecord) -> Result<BranchKind> {
    let want = match r.kind.as_str() {
        "affine" => 2,
        "power" => 3,
        "power_affine" => 4,
        other => return Err(Error::InvalidParameters(format!("unknown branch kind '{other}'"))),
    };
    if r.parameters.len() != want {
        return Err(Error::InvalidParameters(format!(
            "branch kind '{}' takes {want} parameters, got {}",
            r.kind,
            r.parameters.len()
        )));
    }
    Ok(match want {
        2 => BranchKind::Affine,
        3 => BranchKind::Power { exponent: r.parameters[2] },
        _ => BranchKind::PowerAffine {
            exponent: r.parameters[2],
            weight: r.parameters[3],
        },
    })
}

impl PiecewiseMap {
    /// Build a map from its record. Missing comparability and Hölder
    /// constants are measured.
    pub fn from_record(record: &MapRecord) -> Result<Self> {
        let mut branches = Vec::with_capacity(record.branch.len());
        for r in &record.branch {
            let kind = kind_of(r)?;
            if kind != BranchKind::Affine && r.singular_end.is_none() {
                return Err(Error::InvalidParameters(format!(
                    "branch on ({}, {}) needs singular_end",
                    r.domain_lo, r.domain_hi
                )));
            }
            let b = Branch::new(
                r.domain_lo,
                r.domain_hi,
                r.parameters[0],
                r.parameters[1],
                kind,
                r.singular_end.unwrap_or(End::Lo),
            )?;
            branches.push(b.with_holder(r.holder_exponent.unwrap_or(1.0), r.holder_constant.unwrap_or(0.0)));
        }
        let mut points = Vec::with_capacity(record.point.len());
        for r in &record.point {
            let connection = match (r.connection_steps, r.connection_target) {
                (Some(steps), Some(target)) => Some(Connection {
                    steps,
                    target,
                    itinerary: Vec::new(),
                    branch_path: Vec::new(),
                    reach: 0.0,
                }),
                (None, None) => None,
                _ => {
                    return Err(Error::InvalidParameters(
                        "connection_steps and connection_target go together".into(),
                    ))
                }
            };
            points.push(OneSidedPoint {
                location: r.location,
                side: r.side,
                order: r.order,
                comparability: r.comparability.unwrap_or(1.0),
                half_gap: r.half_gap,
                connection,
                removable: r.removable,
            });
        }
        let map = PiecewiseMap::new(branches, points, record.tolerance.unwrap_or(DEFAULT_TOLERANCE))?;
        let measured = super::families::with_measured_constants(map.clone())?;
        // Declared constants win; measured ones fill the gaps.
        let mut points = map.points.clone();
        for (p, (r, m)) in points.iter_mut().zip(record.point.iter().zip(&measured.points)) {
            if r.comparability.is_none() {
                p.comparability = m.comparability;
            }
        }
        let mut branches = map.branches.clone();
        for (b, (r, m)) in branches.iter_mut().zip(record.branch.iter().zip(&measured.branches)) {
            if r.holder_constant.is_none() {
                b.holder_constant = m.holder_constant;
            }
        }
        PiecewiseMap::new(branches, points, map.tolerance)
    }

    pub fn to_record(&self) -> MapRecord {
        MapRecord {
            branch: self
                .branches
                .iter()
                .map(|b| {
                    let mut parameters = vec![b.image_at_lo, b.image_at_hi];
                    match b.kind {
                        BranchKind::Affine => {}
                        BranchKind::Power { exponent } => parameters.push(exponent),
                        BranchKind::PowerAffine { exponent, weight } => {
                            parameters.push(exponent);
                            parameters.push(weight);
                        }
                    }
                    BranchRecord {
                        domain_lo: b.lo,
                        domain_hi: b.hi,
                        kind: b.kind.name().to_string(),
                        parameters,
                        singular_end: (b.kind != BranchKind::Affine).then_some(b.singular_end),
                        holder_exponent: Some(b.holder_exponent),
                        holder_constant: Some(b.holder_constant),
                    }
                })
                .collect(),
            point: self
                .points
                .iter()
                .map(|p| PointRecord {
                    location: p.location,
                    side: p.side,
                    order: p.order,
                    half_gap: p.half_gap,
                    comparability: Some(p.comparability),
                    connection_steps: p.connection.as_ref().map(|c| c.steps),
                    connection_target: p.connection.as_ref().map(|c| c.target),
                    removable: p.removable,
                })
                .collect(),
            tolerance: Some(self.tolerance),
        }
    }
}
