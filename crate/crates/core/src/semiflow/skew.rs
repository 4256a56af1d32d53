//! The skew product `F(x,y) = (f(x), λy + u(x))` and the roof over it.

use crate::error::{Error, Result};
use crate::map::{PiecewiseMap, TruncationParams};

/// Fiber drift `u(x) = slope·(x - ½) + offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    pub slope: f64,
    pub offset: f64,
}

impl Drift {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * (x - 0.5) + self.offset
    }

    pub fn sup(&self) -> f64 {
        self.offset.abs() + 0.5 * self.slope.abs()
    }
}

#[derive(Clone, Debug)]
pub struct SkewProduct {
    pub base: PiecewiseMap,
    pub lambda: f64,
    pub drift: Drift,
}

impl SkewProduct {
    pub fn new(base: PiecewiseMap, lambda: f64, drift: Drift) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParameters(format!("fiber contraction {lambda} outside (0,1)")));
        }
        if !(drift.sup() < 1.0 - lambda) {
            return Err(Error::InvalidParameters(format!(
                "drift reaches {} but must stay below 1 - λ = {}",
                drift.sup(),
                1.0 - lambda
            )));
        }
        Ok(SkewProduct { base, lambda, drift })
    }

    pub fn step(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let x1 = self.base.evaluate(x)?;
        Ok((x1, self.lambda * y + self.drift.eval(x)))
    }
}

/// `τ(x,y) = τ₀ + K·Δ_δ(x) + κ(1+y)/2`; `κ = 0` unless set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoofFunction {
    pub tau0: f64,
    pub k: f64,
    pub delta: f64,
    pub fiber_lipschitz: f64,
}

impl RoofFunction {
    pub fn new(tau0: f64, k: f64, delta: f64) -> Result<Self> {
        if !(tau0 > 0.0) || !(k >= 0.0) {
            return Err(Error::InvalidParameters(format!("roof needs τ₀ > 0 and K >= 0, got {tau0}, {k}")));
        }
        TruncationParams::new(delta)?;
        Ok(RoofFunction { tau0, k, delta, fiber_lipschitz: 0.0 })
    }

    pub fn with_fiber_term(mut self, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameters(format!("fiber Lipschitz constant {kappa} is negative")));
        }
        self.fiber_lipschitz = kappa;
        Ok(self)
    }

    pub fn eval(&self, map: &PiecewiseMap, x: f64, y: f64) -> Result<f64> {
        let fiber = 0.5 * self.fiber_lipschitz * (1.0 + y);
        if self.k == 0.0 {
            return Ok(self.tau0 + fiber);
        }
        let d = map.truncated_distance(x, TruncationParams { delta: self.delta });
        if d <= 0.0 {
            return Err(Error::SingularPoint { x, tolerance: map.tolerance });
        }
        Ok(self.tau0 - self.k * d.ln() + fiber)
    }

    /// `∫∫ τ dx dy/2` over `[0,1]×(-1,1)`, in closed form. Needs the `2δ`
    /// windows around the holes to be disjoint and inside `[0,1]`.
    pub fn integral(&self, map: &PiecewiseMap) -> Result<f64> {
        let d = self.delta;
        // ∫ over one side of a hole.
        let side = d * (1.0 - d.ln()) + (1.0 - d + d * d.ln()) * d / (1.0 - d);
        let holes = map.hole_locations();
        let mut sides = 0usize;
        for (i, &c) in holes.iter().enumerate() {
            for (dir, room) in [(-1.0, c), (1.0, 1.0 - c)] {
                if room <= 0.0 {
                    continue;
                }
                let next = if dir < 0.0 { i.checked_sub(1).map(|j| c - holes[j]) } else { holes.get(i + 1).map(|&h| h - c) };
                let gap = next.map_or(room, |g| g / 2.0);
                if gap < 2.0 * d {
                    return Err(Error::InvalidParameters(format!(
                        "roof window 2δ = {} does not fit next to the hole at {c}",
                        2.0 * d
                    )));
                }
                sides += 1;
            }
        }
        Ok(self.tau0 + self.k * side * sides as f64 + 0.5 * self.fiber_lipschitz)
    }
}
