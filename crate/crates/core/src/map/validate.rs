//! Numerical checks of the hypotheses a map is supposed to satisfy.

use super::families::follow_path;
use super::{Branch, OneSidedPoint, PiecewiseMap};
use crate::precise::{self, dd};

/// Points per branch in the expansion scan.
const SIGMA_GRID: usize = 10_000;
/// Points in the log-log exponent fit.
const EXPONENT_GRID: usize = 60;
/// Allowed deviation of a fitted exponent from `order - 1`.
pub const EXPONENT_TOLERANCE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFit {
    pub point: usize,
    pub fitted: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantCheck {
    pub point: usize,
    pub estimate: f64,
    pub declared: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionCheck {
    pub point: usize,
    pub steps: usize,
    pub reach: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub sigma_hat: f64,
    pub sigma_pass: bool,
    pub exponents: Vec<ExponentFit>,
    pub comparability: Vec<ConstantCheck>,
    pub holder: Vec<ConstantCheck>,
    pub connections: Vec<ConnectionCheck>,
    pub has_singular: bool,
}

impl ValidationReport {
    /// Every hypothesis check passed (the singular set may still be empty).
    pub fn passed(&self) -> bool {
        self.sigma_pass
            && self.exponents.iter().all(|e| e.pass)
            && self.comparability.iter().all(|c| c.pass)
            && self.holder.iter().all(|c| c.pass)
            && self.connections.iter().all(|c| c.pass)
    }

    /// Fit for recurrence experiments: all checks pass and there is at
    /// least one singular point.
    pub fn usable_for_recurrence(&self) -> bool {
        self.passed() && self.has_singular
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.sigma_pass {
            out.push(format!("expansion: min |f'| = {} <= 1", self.sigma_hat));
        }
        for e in self.exponents.iter().filter(|e| !e.pass) {
            out.push(format!("exponent at point {}: {} vs {}", e.point, e.fitted, e.expected));
        }
        for c in self.comparability.iter().filter(|c| !c.pass) {
            out.push(format!("comparability at point {}: {} > {}", c.point, c.estimate, c.declared));
        }
        for c in self.holder.iter().filter(|c| !c.pass) {
            out.push(format!("holder at point {}: {} > {}", c.point, c.estimate, c.declared));
        }
        for c in self.connections.iter().filter(|c| !c.pass) {
            out.push(format!("connection at point {}: {}", c.point, c.detail));
        }
        if !self.has_singular {
            out.push("no singular points".into());
        }
        out
    }
}

/// Distances `r` from `δ_c` down to `δ_c·1e-15`, log-spaced.
fn log_distances(top: f64, count: usize, decades: f64) -> impl Iterator<Item = f64> {
    (0..count).map(move |k| top * 10f64.powf(-decades * k as f64 / (count - 1) as f64))
}

/// Slope magnitude at distance `r` from a one-sided point, resolved in
/// double-double so tiny `r` is not lost to rounding.
fn slope_at(branch: &Branch, p: &OneSidedPoint, r: f64) -> f64 {
    branch.derivative_dd(p.offset_dd(dd(r))).abs()
}

/// Smallest `B` with `B^{-1} r^{α-1} <= |f'| <= B r^{α-1}` on `Δ(c, δ_c)`.
pub fn comparability_estimate(branch: &Branch, p: &OneSidedPoint) -> f64 {
    let top = p.half_gap.min(branch.len());
    let mut b: f64 = 1.0;
    for r in log_distances(top, 200, 15.0) {
        let ratio = slope_at(branch, p, r) / r.powf(p.order - 1.0);
        b = b.max(ratio).max(1.0 / ratio);
    }
    b
}

/// Largest `|f'(t) - f'(s)| / |t - s|^θ` over grid pairs in `Δ(c, δ_c)`.
pub fn holder_estimate(map: &PiecewiseMap, index: usize, theta: f64) -> f64 {
    let p = &map.points[index];
    let Some(b) = map.branch_at(p) else { return f64::INFINITY };
    let branch = &map.branches[b];
    let n = 200;
    let xs: Vec<f64> = (1..=n).map(|i| p.offset(p.half_gap * i as f64 / n as f64)).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| branch.derivative(x)).collect();
    let mut h: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let q = (ds[i] - ds[j]).abs() / (xs[i] - xs[j]).abs().powf(theta);
            h = h.max(q);
        }
    }
    h
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check_connection(map: &PiecewiseMap, index: usize) -> ConnectionCheck {
    let p = &map.points[index];
    let Some(conn) = &p.connection else {
        return ConnectionCheck {
            point: index,
            steps: 0,
            reach: 0.0,
            pass: false,
            detail: "order-1 point without a connection".into(),
        };
    };
    let fail = |detail: String| ConnectionCheck {
        point: index,
        steps: conn.steps,
        reach: conn.reach,
        pass: false,
        detail,
    };
    let target = &map.points[conn.target];
    let mut prev: Option<f64> = None;
    let mut direction = 0.0;
    for i in 1..=1000 {
        let x = p.offset_dd(dd(conn.reach * i as f64 / 1000.0));
        let Some(y) = follow_path(map, x, &conn.branch_path) else {
            return fail(format!("grid point {i} leaves the stored branch path"));
        };
        let off = (precise::to_f64(y) - target.location) * target.side.sign();
        if !(off > 0.0 && off < target.half_gap) {
            return fail(format!("grid point {i} lands outside the target neighbourhood"));
        }
        if let Some(q) = prev {
            let step = (off - q).signum();
            if off == q || (direction != 0.0 && step != direction) {
                return fail("composition is not monotone".into());
            }
            direction = step;
        }
        prev = Some(off);
    }
    // Re-derive the stored itinerary from the one-sided limit.
    let mut x = p.offset_dd(dd(1e-12_f64.min(conn.reach * 1e-3)));
    for (j, &b) in conn.branch_path.iter().enumerate() {
        x = map.branches[b].eval_dd(x);
        if j + 1 < conn.steps {
            let y = precise::to_f64(x);
            let stored = &map.points[conn.itinerary[j]];
            let d_stored = (y - stored.location).abs();
            let nearest = map.distance_to_set(y);
            if (d_stored - nearest).abs() > 1e-9 {
                return fail(format!("itinerary entry {j} is not the nearest boundary point"));
            }
        }
    }
    if (precise::to_f64(x) - target.location).abs() > 1e-6 {
        return fail("one-sided limit misses the target".into());
    }
    ConnectionCheck {
        point: index,
        steps: conn.steps,
        reach: conn.reach,
        pass: true,
        detail: String::new(),
    }
}

pub fn validate_map(map: &PiecewiseMap) -> ValidationReport {
    let mut sigma_hat = f64::INFINITY;
    for b in &map.branches {
        for i in 0..=SIGMA_GRID {
            let x = b.lo + b.len() * i as f64 / SIGMA_GRID as f64;
            let x = x.clamp(b.lo + map.tolerance * 2.0, b.hi - map.tolerance * 2.0);
            sigma_hat = sigma_hat.min(b.derivative(x).abs());
        }
    }
    let mut exponents = Vec::new();
    let mut comparability = Vec::new();
    for (i, p) in map.points.iter().enumerate() {
        let Some(b) = map.branch_at(p) else { continue };
        let branch = &map.branches[b];
        if p.is_singular() {
            let top = 1e-2_f64.min(p.half_gap);
            let decades = (top / 1e-8).log10();
            let (xs, ys): (Vec<f64>, Vec<f64>) = log_distances(top, EXPONENT_GRID, decades)
                .map(|r| (r.ln(), slope_at(branch, p, r).ln()))
                .unzip();
            let fitted = fit_slope(&xs, &ys);
            let expected = p.order - 1.0;
            exponents.push(ExponentFit {
                point: i,
                fitted,
                expected,
                pass: (fitted - expected).abs() <= EXPONENT_TOLERANCE,
            });
        }
        if !p.removable {
            let estimate = comparability_estimate(branch, p);
            comparability.push(ConstantCheck {
                point: i,
                estimate,
                declared: p.comparability,
                pass: estimate <= p.comparability * (1.0 + 1e-9),
            });
        }
    }
    let mut holder = Vec::new();
    let mut connections = Vec::new();
    for (i, p) in map.discontinuity_points() {
        if let Some(b) = map.branch_at(p) {
            let branch = &map.branches[b];
            let estimate = holder_estimate(map, i, branch.holder_exponent);
            holder.push(ConstantCheck {
                point: i,
                estimate,
                declared: branch.holder_constant,
                pass: estimate.is_finite() && estimate <= branch.holder_constant * (1.0 + 1e-9) + 1e-12,
            });
        }
        connections.push(check_connection(map, i));
    }
    ValidationReport {
        sigma_hat,
        sigma_pass: sigma_hat > 1.0,
        exponents,
        comparability,
        holder,
        connections,
        has_singular: map.singular_points().next().is_some(),
    }
}
