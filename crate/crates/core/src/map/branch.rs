use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precise::{self, dd, Dd};

/// Which end of a branch domain carries the power-law behaviour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Lo,
    Hi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

/// Closed-form shape of a branch.
///
/// With `s` the normalized distance from the singular end, the branch value
/// interpolates between its two end images through
/// `h(s) = w s^a + (1 - w) s`. Affine is `w = 0`, power is `w = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchKind {
    Affine,
    Power { exponent: f64 },
    PowerAffine { exponent: f64, weight: f64 },
}

impl BranchKind {
    /// `(exponent, weight)` of the profile `h`.
    pub fn profile(&self) -> (f64, f64) {
        match *self {
            BranchKind::Affine => (1.0, 0.0),
            BranchKind::Power { exponent } => (exponent, 1.0),
            BranchKind::PowerAffine { exponent, weight } => (exponent, weight),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::Affine => "affine",
            BranchKind::Power { .. } => "power",
            BranchKind::PowerAffine { .. } => "power_affine",
        }
    }
}

/// One monotone piece of a piecewise expanding map.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub image_at_lo: f64,
    pub image_at_hi: f64,
    pub kind: BranchKind,
    pub singular_end: End,
    pub holder_exponent: f64,
    pub holder_constant: f64,
}

impl Branch {
    pub fn new(
        lo: f64,
        hi: f64,
        image_at_lo: f64,
        image_at_hi: f64,
        kind: BranchKind,
        singular_end: End,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&lo) || !(hi > lo && hi <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "branch domain ({lo}, {hi}) is not a subinterval of [0,1]"
            )));
        }
        for y in [image_at_lo, image_at_hi] {
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::InvalidParameters(format!(
                    "branch image end {y} outside [0,1]"
                )));
            }
        }
        if image_at_lo == image_at_hi {
            return Err(Error::InvalidParameters(format!(
                "branch on ({lo}, {hi}) is constant"
            )));
        }
        let (a, w) = kind.profile();
        if !(a > 0.0 && a <= 1.0) || !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameters(format!(
                "branch exponent {a} / weight {w} out of range"
            )));
        }
        Ok(Branch {
            lo,
            hi,
            image_at_lo,
            image_at_hi,
            kind,
            singular_end,
            holder_exponent: 1.0,
            holder_constant: 0.0,
        })
    }

    pub fn with_holder(mut self, exponent: f64, constant: f64) -> Self {
        self.holder_exponent = exponent;
        self.holder_constant = constant;
        self
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn monotone(&self) -> Monotone {
        if self.image_at_hi > self.image_at_lo {
            Monotone::Increasing
        } else {
            Monotone::Decreasing
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Image interval `(lo, hi)` of the branch.
    pub fn image(&self) -> (f64, f64) {
        (
            self.image_at_lo.min(self.image_at_hi),
            self.image_at_lo.max(self.image_at_hi),
        )
    }

    /// True when the profile has a genuine power part (unbounded slope).
    pub fn is_singular(&self) -> bool {
        let (a, w) = self.kind.profile();
        w > 0.0 && a < 1.0
    }

    fn ends(&self) -> (f64, f64) {
        match self.singular_end {
            End::Lo => (self.image_at_lo, self.image_at_hi),
            End::Hi => (self.image_at_hi, self.image_at_lo),
        }
    }

    fn ds_dx(&self) -> f64 {
        match self.singular_end {
            End::Lo => 1.0 / self.len(),
            End::Hi => -1.0 / self.len(),
        }
    }

    /// Normalized distance from the singular end.
    pub fn s_of(&self, x: f64) -> f64 {
        match self.singular_end {
            End::Lo => (x - self.lo) / self.len(),
            End::Hi => (self.hi - x) / self.len(),
        }
    }

    pub fn s_of_dd(&self, x: Dd) -> Dd {
        let len = dd(self.hi) - self.lo;
        match self.singular_end {
            End::Lo => precise::div(x - self.lo, len),
            End::Hi => precise::div(dd(self.hi) - x, len),
        }
    }

    fn x_of_dd(&self, s: Dd) -> Dd {
        let len = dd(self.hi) - self.lo;
        match self.singular_end {
            End::Lo => s * len + self.lo,
            End::Hi => dd(self.hi) - s * len,
        }
    }

    fn h(&self, s: f64) -> f64 {
        let (a, w) = self.kind.profile();
        if w == 0.0 {
            s
        } else if w == 1.0 {
            s.powf(a)
        } else {
            w * s.powf(a) + (1.0 - w) * s
        }
    }

    fn h_dd(&self, s: Dd) -> Dd {
        let (a, w) = self.kind.profile();
        if w == 0.0 {
            s
        } else if w == 1.0 {
            precise::powf(s, a)
        } else {
            precise::powf(s, a) * w + s * (1.0 - w)
        }
    }

    fn h_prime(&self, s: f64) -> f64 {
        let (a, w) = self.kind.profile();
        if w == 0.0 {
            1.0
        } else {
            w * a * s.powf(a - 1.0) + (1.0 - w)
        }
    }

    /// Inverse of `h` on `[0,1]` in `f64`.
    fn h_inv(&self, v: f64) -> f64 {
        let (a, w) = self.kind.profile();
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return 1.0;
        }
        if w == 0.0 {
            return v;
        }
        if w == 1.0 {
            return v.powf(1.0 / a);
        }
        // Both bounds sit right of the root because h is concave, so Newton
        // from there stays bracketed; bisection covers the rest.
        let mut hi = (v / w).powf(1.0 / a).min(v / (1.0 - w)).min(1.0);
        let mut lo = 0.0;
        let mut s = hi;
        for _ in 0..200 {
            let g = self.h(s) - v;
            if g > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let step = g / self.h_prime(s);
            let mut next = s - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-17 * s.max(1e-300) || hi - lo <= 1e-16 * hi {
                return next;
            }
            s = next;
        }
        s
    }

    fn h_inv_dd(&self, v: Dd) -> Dd {
        let (a, w) = self.kind.profile();
        // Affine branches extend linearly, which keeps pull-backs of points
        // just past an f64-rounded endpoint consistent.
        if w == 0.0 {
            return v;
        }
        if v <= dd(0.0) {
            return dd(0.0);
        }
        if v >= dd(1.0) {
            return dd(1.0);
        }
        if w == 1.0 {
            return precise::root(v, a);
        }
        let mut s = dd(self.h_inv(precise::to_f64(v)));
        for _ in 0..3 {
            if s.hi() <= 0.0 {
                break;
            }
            let g = self.h_dd(s) - v;
            s -= g / self.h_prime(s.hi());
        }
        s
    }

    /// Branch value; defined on the closed domain.
    pub fn eval(&self, x: f64) -> f64 {
        let (ys, yo) = self.ends();
        ys + (yo - ys) * self.h(self.s_of(x).clamp(0.0, 1.0))
    }

    pub fn eval_dd(&self, x: Dd) -> Dd {
        let (ys, yo) = self.ends();
        let s = precise::max(precise::min(self.s_of_dd(x), dd(1.0)), dd(0.0));
        self.h_dd(s) * (dd(yo) - ys) + ys
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.derivative_at_s(self.s_of(x))
    }

    /// Derivative at a double-double point; the distance to the singular end
    /// is formed before rounding so it stays accurate next to the end.
    pub fn derivative_dd(&self, x: Dd) -> f64 {
        self.derivative_at_s(precise::to_f64(self.s_of_dd(x)))
    }

    fn derivative_at_s(&self, s: f64) -> f64 {
        let (ys, yo) = self.ends();
        (yo - ys) * self.h_prime(s) * self.ds_dx()
    }

    /// Smallest slope magnitude on the branch; `h'` is decreasing so it is
    /// attained at the regular end.
    pub fn min_slope(&self) -> f64 {
        let (a, w) = self.kind.profile();
        (self.image_at_hi - self.image_at_lo).abs() / self.len() * (w * a + 1.0 - w)
    }

    /// Preimage of `y` inside the closed domain, clamped when `y` is outside
    /// the image.
    pub fn inverse(&self, y: f64) -> f64 {
        let (ys, yo) = self.ends();
        let s = self.h_inv((y - ys) / (yo - ys));
        match self.singular_end {
            End::Lo => self.lo + s * self.len(),
            End::Hi => self.hi - s * self.len(),
        }
    }

    pub fn inverse_dd(&self, y: Dd) -> Dd {
        let (ys, yo) = self.ends();
        let v = precise::div(y - ys, dd(yo) - ys);
        self.x_of_dd(self.h_inv_dd(v))
    }
}
