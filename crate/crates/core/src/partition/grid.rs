use crate::error::{Error, Result};
use crate::precise::{self, dd, Dd};

/// The grid `a_p = p^γ`, `γ = -1/(ε₁β₁)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSequence {
    pub epsilon1: f64,
    pub beta1: f64,
    pub gamma: f64,
}

/// Measured gap and span constants of a grid sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConstants {
    pub k0: f64,
    pub k1: f64,
    /// Range of `(a_p - a_{p+1}) / a_p^{1+ε₁β₁}` over the checked `p`.
    pub gap_ratio_min: f64,
    pub gap_ratio_max: f64,
    /// Largest `(a_{p-1} - a_{p+2}) / (a_p - a_{p+1})`.
    pub span_ratio_max: f64,
    /// Limit of the gap ratio, `1/(ε₁β₁)`.
    pub gap_ratio_limit: f64,
    pub p_max: usize,
}

impl GridSequence {
    pub fn new(epsilon1: f64, beta1: f64) -> Result<Self> {
        if !(epsilon1 > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) {
            return Err(Error::InvalidParameters(format!(
                "grid needs epsilon1 > 0 and beta1 in (0,1), got {epsilon1}, {beta1}"
            )));
        }
        if !(1.0 - beta1 > epsilon1 * beta1) {
            return Err(Error::InvalidParameters(format!(
                "grid needs 1 - beta1 > epsilon1 * beta1, got {epsilon1}, {beta1}"
            )));
        }
        Ok(GridSequence {
            epsilon1,
            beta1,
            gamma: -1.0 / (epsilon1 * beta1),
        })
    }

    /// `ε₁β₁`.
    pub fn eb(&self) -> f64 {
        self.epsilon1 * self.beta1
    }

    /// `a_p`.
    pub fn value(&self, p: usize) -> f64 {
        (p as f64).powf(self.gamma)
    }

    pub fn value_dd(&self, p: usize) -> Dd {
        if p == 1 {
            return dd(1.0);
        }
        precise::exp(precise::ln(dd(p as f64)) * self.gamma)
    }

    /// `a_p - a_{p+1}` without cancellation.
    pub fn gap(&self, p: usize) -> f64 {
        -self.value(p) * (self.gamma * (1.0 / p as f64).ln_1p()).exp_m1()
    }

    /// Least `p >= 1` with `a_p < r`.
    pub fn first_below(&self, r: f64) -> usize {
        let guess = r.powf(1.0 / self.gamma).floor().max(1.0) as usize;
        let mut p = guess.saturating_sub(2).max(1);
        while self.value(p) >= r {
            p += 1;
        }
        p
    }

    /// `(a_p - a_{p+1}) / a_p^{1+ε₁β₁}`; since `a_p^{ε₁β₁} = 1/p` this is
    /// `p (1 - (1 + 1/p)^γ)`.
    pub fn gap_ratio(&self, p: usize) -> f64 {
        -(p as f64) * (self.gamma * (1.0 / p as f64).ln_1p()).exp_m1()
    }

    /// `(a_{p-1} - a_{p+2}) / (a_p - a_{p+1})` for `p >= 2`.
    pub fn span_ratio(&self, p: usize) -> f64 {
        (self.gap(p - 1) + self.gap(p) + self.gap(p + 1)) / self.gap(p)
    }
}

/// Smallest gap and span constants over `1 <= p <= p_max`.
///
/// `K0` also covers the limit `1/(ε₁β₁)` of the gap ratio, which the partition
/// needs for every `p`. `expansion_floor` is `σ^{T_0}` (1 without a map).
pub fn verify_grid_constants(seq: &GridSequence, p_max: usize, expansion_floor: f64) -> Result<GridConstants> {
    if p_max < 10 {
        return Err(Error::InvalidParameters(format!("p_max {p_max} < 10")));
    }
    let limit = 1.0 / seq.eb();
    let mut lo = limit;
    let mut hi = limit;
    let mut span: f64 = 0.0;
    for p in 1..=p_max {
        let r = seq.gap_ratio(p);
        lo = lo.min(r);
        hi = hi.max(r);
        if p >= 2 {
            span = span.max(seq.span_ratio(p));
        }
    }
    let k0 = hi.max(1.0 / lo);
    let k1 = span.max(1.0 + 2.0 * k0).max(expansion_floor);
    Ok(GridConstants {
        k0,
        k1,
        gap_ratio_min: lo,
        gap_ratio_max: hi,
        span_ratio_max: span,
        gap_ratio_limit: limit,
        p_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = GridSequence::new(0.5, 0.5).unwrap();
        assert_eq!(g.gamma, -4.0);
        assert_eq!(g.value(1), 1.0);
        assert_eq!(g.value(2), 0.0625);
        assert!((g.value(10) - 1e-4).abs() < 1e-19);
        assert!((precise::to_f64(g.value_dd(10)) - 1e-4).abs() < 1e-19);
    }

    #[test]
    fn gap_is_accurate() {
        let g = GridSequence::new(0.3, 0.6).unwrap();
        for p in [1usize, 7, 300, 100_000] {
            let exact = g.value_dd(p) - g.value_dd(p + 1);
            let rel = (g.gap(p) - precise::to_f64(exact)).abs() / g.gap(p);
            assert!(rel < 1e-13, "p={p} rel={rel}");
        }
    }

    #[test]
    fn gap_ratio_tends_to_limit() {
        let g = GridSequence::new(0.5, 0.5).unwrap();
        assert!((g.gap_ratio(100_000) / 4.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn constants_respect_floor_and_are_stable() {
        let g = GridSequence::new(0.5, 0.5).unwrap();
        let small = verify_grid_constants(&g, 10, 1.0).unwrap();
        let big = verify_grid_constants(&g, 1_000_000, 1.0).unwrap();
        assert!(big.k1 >= 1.0 + 2.0 * big.k0);
        assert!((small.k0 - big.k0).abs() / big.k0 < 0.01);
        for p in 1..=1000 {
            let r = g.gap_ratio(p);
            assert!(r >= 1.0 / big.k0 && r <= big.k0);
        }
        assert!(verify_grid_constants(&g, 10, 50.0).unwrap().k1 >= 50.0);
    }

    #[test]
    fn first_below_matches_closed_form() {
        let g = GridSequence::new(0.3, 0.6).unwrap();
        for r in [0.25, 0.075, 1e-3, 1e-9] {
            let p = g.first_below(r);
            assert!(g.value(p) < r && (p == 1 || g.value(p - 1) >= r));
            assert_eq!(p, r.powf(1.0 / g.gamma).ceil() as usize);
        }
    }

    #[test]
    fn rejects_infeasible_pairs() {
        assert!(GridSequence::new(0.5, 0.8).is_err());
        assert!(GridSequence::new(0.0, 0.5).is_err());
    }
}
