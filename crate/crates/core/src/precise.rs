//! Double-double helpers.
//!
//! `twofloat` supplies the arithmetic; its transcendental functions are only
//! accurate to about one `f64` ulp, so `exp`, `ln` and `powf` are redone here
//! to full double-double accuracy.

use twofloat::TwoFloat;

pub type Dd = TwoFloat;

#[inline]
pub fn dd(x: f64) -> Dd {
    TwoFloat::from(x)
}

/// Multiply by `2^k` without rounding.
fn ldexp(x: Dd, k: i32) -> Dd {
    let mut out = x;
    let mut k = k;
    while k > 0 {
        let step = k.min(1000);
        out = out * 2f64.powi(step);
        k -= step;
    }
    while k < 0 {
        let step = (-k).min(1000);
        out = out * 2f64.powi(-step);
        k += step;
    }
    out
}

/// `exp(x) - 1` for `|x| <= 0.36`, used as the kernel of [`exp`].
fn expm1_reduced(r: Dd) -> Dd {
    // Scale by 2^-10 so a short Taylor series is exact to 1e-33, then undo
    // the scaling with e^{2a} - 1 = (e^a - 1)(e^a + 1).
    let s = r * 2f64.powi(-10);
    let mut term = s;
    let mut sum = s;
    for i in 2..=12 {
        term = term * s / i as f64;
        sum += term;
    }
    for _ in 0..10 {
        sum = sum * (sum + 2.0);
    }
    sum
}

pub fn exp(x: Dd) -> Dd {
    let h = x.hi();
    if h.is_nan() {
        return dd(f64::NAN);
    }
    if h > 709.7 {
        return dd(f64::INFINITY);
    }
    if h < -745.2 {
        return dd(0.0);
    }
    let ln2 = twofloat::consts::LN_2;
    let k = (h / ln2.hi()).round();
    let r = x - ln2 * k;
    ldexp(expm1_reduced(r) + 1.0, k as i32)
}

/// Natural log for `x > 0`, by Newton on [`exp`] from the `f64` guess.
pub fn ln(x: Dd) -> Dd {
    let h = x.hi();
    if h <= 0.0 {
        return dd(if h == 0.0 { f64::NEG_INFINITY } else { f64::NAN });
    }
    if h.is_infinite() {
        return dd(f64::INFINITY);
    }
    let mut y = dd(h.ln());
    for _ in 0..2 {
        y = y + x * exp(-y) - 1.0;
    }
    y
}

/// `x^a` for `x >= 0`.
pub fn powf(x: Dd, a: f64) -> Dd {
    if x.hi() == 0.0 {
        return if a > 0.0 { dd(0.0) } else { dd(f64::INFINITY) };
    }
    if a == 1.0 {
        return x;
    }
    exp(ln(x) * a)
}

/// `x^(1/a)`, with the reciprocal exponent applied exactly.
pub fn root(x: Dd, a: f64) -> Dd {
    if x.hi() == 0.0 {
        return dd(0.0);
    }
    if a == 1.0 {
        return x;
    }
    exp(ln(x) / a)
}

/// Double-double quotient by long division; the `Div` impl of `twofloat`
/// loses about half of the low word.
pub fn div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    if !q1.is_finite() || q1 == 0.0 {
        return dd(q1);
    }
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    dd(q1) + q2 + q3
}

pub fn abs(x: Dd) -> Dd {
    if x.hi() < 0.0 {
        -x
    } else {
        x
    }
}

pub fn min(a: Dd, b: Dd) -> Dd {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max(a: Dd, b: Dd) -> Dd {
    if a >= b {
        a
    } else {
        b
    }
}

/// Closest `f64` to a double-double value.
#[inline]
pub fn to_f64(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// Shortest round-tripping text for a double-double: `hi` followed by a
/// signed `lo` correction when it is nonzero.
pub fn format(x: Dd) -> String {
    if x.lo() == 0.0 {
        format!("{:.16e}", x.hi())
    } else {
        format!("{:.16e}{:+.16e}", x.hi(), x.lo())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, rel: f64) -> bool {
        let d = to_f64(abs(a - b));
        d <= rel * to_f64(abs(b)).max(1e-300)
    }

    #[test]
    fn exp_of_ln_roundtrips_to_dd_accuracy() {
        for &v in &[0.3, 1e-17, 0.5, 1.0 - 1e-12, 7.25, 1e-300, 123456.789] {
            let x = dd(v);
            let back = exp(ln(x));
            assert!(close(back, x, 1e-29), "{v}: {}", format(back - x));
        }
    }

    #[test]
    fn exp_matches_known_constant() {
        let e = exp(dd(1.0));
        assert!(close(e, twofloat::consts::E, 1e-30));
    }

    #[test]
    fn ln_two_matches_constant() {
        assert!(close(ln(dd(2.0)), twofloat::consts::LN_2, 1e-30));
    }

    #[test]
    fn powf_inverse_pairs() {
        let x = dd(0.123456789);
        let y = powf(powf(x, 0.5), 2.0);
        assert!(close(y, x, 1e-28));
        assert_eq!(powf(dd(0.0), 0.5), dd(0.0));
        assert!(close(powf(dd(0.25), 0.5), dd(0.5), 1e-31));
    }

    #[test]
    fn division_is_dd_accurate() {
        let a = dd(0.9967981951843436) + 4.185566523136082e-17;
        let b = dd(0.9) - 0.1;
        assert!(to_f64(abs(div(a * b, b) - a)) < 1e-31);
        let third = div(dd(1.0), dd(3.0));
        assert!(to_f64(abs(third * 3.0 - 1.0)) < 1e-32);
        let x = dd(0.7) / 3.0;
        assert!(to_f64(abs(x * 3.0 - 0.7)) < 1e-32);
    }

    #[test]
    fn ldexp_is_exact() {
        let x = dd(1.0) / 3.0;
        let y = ldexp(ldexp(x, 900), -900);
        assert_eq!(y, x);
    }
}
