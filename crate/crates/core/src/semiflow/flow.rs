//! States of the suspension, lap numbers and time averages.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::map::{PiecewiseMap, TruncationParams};

use super::skew::{RoofFunction, SkewProduct};

/// A point `(x, y, s)` with `0 ≤ s < τ(x,y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiflowState {
    pub x: f64,
    pub y: f64,
    pub s: f64,
}

/// The skew product together with its roof.
#[derive(Clone, Debug)]
pub struct Suspension {
    pub skew: SkewProduct,
    pub roof: RoofFunction,
}

/// Result of [`Suspension::lap_number`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lap {
    pub n: usize,
    /// `s + t - S_nτ`, in `[0, τ(Fⁿ(x,y)))`.
    pub residual: f64,
    /// `Fⁿ(x,y)`.
    pub x: f64,
    pub y: f64,
    pub s_n: f64,
    pub s_next: f64,
}

impl Suspension {
    pub fn new(skew: SkewProduct, roof: RoofFunction) -> Self {
        Suspension { skew, roof }
    }

    pub fn base(&self) -> &PiecewiseMap {
        &self.skew.base
    }

    pub fn tau(&self, x: f64, y: f64) -> Result<f64> {
        self.roof.eval(&self.skew.base, x, y)
    }

    pub fn state(&self, x: f64, y: f64, s: f64) -> Result<SemiflowState> {
        let tau = self.tau(x, y)?;
        if !(s >= 0.0 && s < tau) || !(y > -1.0 && y < 1.0) {
            return Err(Error::InvalidParameters(format!("state ({x}, {y}, {s}) outside the suspension")));
        }
        Ok(SemiflowState { x, y, s })
    }

    /// The unique `n` with `S_nτ ≤ s + t < S_{n+1}τ`.
    pub fn lap_number(&self, z: SemiflowState, t: f64) -> Result<Lap> {
        let total = z.s + t;
        let (mut x, mut y) = (z.x, z.y);
        let mut acc = 0.0;
        let mut n = 0;
        loop {
            let tau = self.tau(x, y).map_err(|_| Error::OrbitHitSingular { index: n })?;
            if acc + tau > total {
                return Ok(Lap { n, residual: total - acc, x, y, s_n: acc, s_next: acc + tau });
            }
            acc += tau;
            (x, y) = self.skew.step(x, y).map_err(|_| Error::OrbitHitSingular { index: n })?;
            n += 1;
        }
    }

    /// `φ^t(z)`.
    pub fn evolve(&self, z: SemiflowState, t: f64) -> Result<SemiflowState> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameters(format!("flow time {t} is negative")));
        }
        let lap = self.lap_number(z, t)?;
        Ok(SemiflowState { x: lap.x, y: lap.y, s: lap.residual })
    }
}

/// A flow observable `ψ(x, y, s)` with its sup norm (infinite when unbounded).
#[derive(Clone)]
pub struct FlowObservable {
    pub name: String,
    pub sup: f64,
    f: Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for FlowObservable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FlowObservable({}, sup {})", self.name, self.sup)
    }
}

impl FlowObservable {
    pub fn new(name: &str, sup: f64, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        FlowObservable { name: name.to_string(), sup, f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new("constant", c.abs(), move |_, _, _| c)
    }

    pub fn coordinate_x() -> Self {
        Self::new("x", 1.0, |x, _, _| x)
    }

    pub fn coordinate_y() -> Self {
        Self::new("y", 1.0, |_, y, _| y)
    }

    /// `Δ_δ(x)`; unbounded.
    pub fn log_distance(map: &PiecewiseMap, delta: f64) -> Result<Self> {
        let params = TruncationParams::new(delta)?;
        let map = map.clone();
        Ok(Self::new("log_distance", f64::INFINITY, move |x, _, _| {
            -map.truncated_distance(x, params).ln()
        }))
    }

    /// `(1 - ((x-c)/w)²)²` on `|x - c| < w`, zero elsewhere.
    pub fn bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameters(format!("bump width {width} must be positive")));
        }
        Ok(Self::new("bump", 1.0, move |x, _, _| {
            let u = (x - center) / width;
            if u.abs() < 1.0 {
                (1.0 - u * u).powi(2)
            } else {
                0.0
            }
        }))
    }

    pub fn eval(&self, x: f64, y: f64, s: f64) -> f64 {
        (self.f)(x, y, s)
    }
}

/// Composite Simpson rule with step at most `h`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, h: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut m = ((b - a) / h).ceil().max(2.0) as usize;
    m += m % 2;
    let step = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + step * i as f64);
    }
    sum * step / 3.0
}

/// `φ(x,y) = ∫_0^{τ(x,y)} ψ(x, y, t) dt`: no base step happens inside one roof
/// interval, so the integrand only moves in `s`.
#[derive(Clone, Debug)]
pub struct InducedObservable {
    pub psi: FlowObservable,
    pub step: f64,
}

impl InducedObservable {
    pub fn new(psi: FlowObservable, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameters(format!("quadrature step {step} must be positive")));
        }
        Ok(InducedObservable { psi, step })
    }

    /// `∫_a^b ψ(x, y, t) dt`.
    pub fn partial(&self, x: f64, y: f64, a: f64, b: f64) -> f64 {
        simpson(|t| self.psi.eval(x, y, t), a, b, self.step)
    }

    pub fn eval(&self, flow: &Suspension, x: f64, y: f64) -> Result<f64> {
        Ok(self.partial(x, y, 0.0, flow.tau(x, y)?))
    }

    /// `φ(x, 0)`, the function handed to the base.
    pub fn base_fn(&self, flow: &Suspension, x: f64) -> Result<f64> {
        self.eval(flow, x, 0.0)
    }
}

/// A time average together with its decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeAverage {
    /// `(1/T)∫_0^T ψ(φ^t z) dt`, assembled from head, full roofs and tail.
    pub average: f64,
    /// `(1/T) S_nφ(x)`.
    pub induced: f64,
    /// `I(x,s,T)`.
    pub correction: f64,
    /// `(2s + τ(Fⁿx))·sup|ψ|/T`.
    pub bound: f64,
    pub laps: usize,
}

/// `(1/T)∫_0^T ψ(φ^t z) dt`.
pub fn flow_time_average(flow: &Suspension, phi: &InducedObservable, z: SemiflowState, t: f64) -> Result<TimeAverage> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameters(format!("averaging time {t} must be positive")));
    }
    let lap = flow.lap_number(z, t)?;
    let tau_x = flow.tau(z.x, z.y)?;
    let tail = phi.partial(lap.x, lap.y, 0.0, lap.residual);
    let head = phi.partial(z.x, z.y, 0.0, z.s);
    let (mut x, mut y) = (z.x, z.y);
    let mut integral;
    let mut birkhoff = 0.0;
    if lap.n == 0 {
        integral = phi.partial(z.x, z.y, z.s, z.s + t);
    } else {
        integral = phi.partial(x, y, z.s, tau_x) + tail;
        birkhoff += phi.partial(x, y, 0.0, tau_x);
        for j in 1..lap.n {
            (x, y) = flow.skew.step(x, y).map_err(|_| Error::OrbitHitSingular { index: j })?;
            let v = phi.eval(flow, x, y).map_err(|_| Error::OrbitHitSingular { index: j })?;
            integral += v;
            birkhoff += v;
        }
    }
    let correction = (tail - head) / t;
    let bound = (2.0 * z.s + (lap.s_next - lap.s_n)) * phi.psi.sup / t;
    Ok(TimeAverage { average: integral / t, induced: birkhoff / t, correction, bound, laps: lap.n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{make_doubling_map, make_lorenz_map};
    use crate::semiflow::Drift;

    fn lorenz() -> Suspension {
        let sp = SkewProduct::new(make_lorenz_map(0.6).unwrap(), 0.5, Drift { slope: 0.4, offset: 0.0 }).unwrap();
        Suspension::new(sp, RoofFunction::new(1.0, 1.0, 0.05).unwrap())
    }

    fn unit_roof() -> Suspension {
        let sp = SkewProduct::new(make_doubling_map(), 0.5, Drift { slope: 0.0, offset: 0.0 }).unwrap();
        Suspension::new(sp, RoofFunction::new(1.0, 0.0, 0.05).unwrap())
    }

    #[test]
    fn constant_roof_laps() {
        let f = unit_roof();
        let z = f.state(0.3, 0.0, 0.0).unwrap();
        let lap = f.lap_number(z, 3.5).unwrap();
        assert_eq!((lap.n, lap.residual), (3, 0.5));
        let lap = f.lap_number(f.state(0.3, 0.0, 0.25).unwrap(), 0.5).unwrap();
        assert_eq!((lap.n, lap.residual), (0, 0.75));
    }

    #[test]
    fn evolve_basics() {
        let f = lorenz();
        let z = f.state(0.3, 0.1, 0.2).unwrap();
        assert_eq!(f.evolve(z, 0.0).unwrap(), z);
        let a = f.evolve(f.evolve(z, 0.7).unwrap(), 1.3).unwrap();
        let b = f.evolve(z, 2.0).unwrap();
        assert!((a.x - b.x).abs() < 1e-10 && (a.y - b.y).abs() < 1e-10 && (a.s - b.s).abs() < 1e-10);
        // Just below the roof a short time crosses exactly once.
        let tau = f.tau(0.3, 0.1).unwrap();
        let e = 1e-3;
        let w = f.evolve(f.state(0.3, 0.1, tau - e).unwrap(), 2.0 * e).unwrap();
        let (x1, y1) = f.skew.step(0.3, 0.1).unwrap();
        assert_eq!((w.x, w.y), (x1, y1));
        assert!((w.s - e).abs() < 1e-12);
    }

    #[test]
    fn induced_observable_examples() {
        let f = lorenz();
        let one = InducedObservable::new(FlowObservable::constant(1.0), 1.0 / 64.0).unwrap();
        let x = 0.49;
        let tau = f.tau(x, 0.0).unwrap();
        assert!((one.eval(&f, x, 0.0).unwrap() - tau).abs() < 1e-12);
        let t2 = tau * tau;
        let lin = InducedObservable::new(FlowObservable::new("s", f64::INFINITY, move |_, _, s| 2.0 * s / t2), 1.0 / 64.0).unwrap();
        assert!((lin.eval(&f, x, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_average_of_one() {
        let f = lorenz();
        let one = InducedObservable::new(FlowObservable::constant(1.0), 1.0 / 64.0).unwrap();
        for t in [0.1, 3.0, 17.5] {
            let a = flow_time_average(&f, &one, f.state(0.21, -0.3, 0.4).unwrap(), t).unwrap();
            assert!((a.average - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_roof_matches_birkhoff() {
        let f = unit_roof();
        let phi = InducedObservable::new(FlowObservable::coordinate_x(), 1.0 / 64.0).unwrap();
        let z = f.state(0.123, 0.0, 0.6).unwrap();
        let t = 40.0;
        let a = flow_time_average(&f, &phi, z, t).unwrap();
        let mut x = 0.123;
        let mut s = 0.0;
        for _ in 0..a.laps {
            s += x;
            x = f.base().evaluate(x).unwrap();
        }
        assert!((a.induced - s / t).abs() < 1e-12);
        assert!((a.average - a.induced - a.correction).abs() < 1e-12);
        assert!(a.correction.abs() <= a.bound);
        assert!((a.average - s / t).abs() <= 2.0 / t);
    }
}
