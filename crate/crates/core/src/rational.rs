//! Exact rational helpers.
//!
//! [`Rational`] is `num_rational::BigRational`, which always stores values in
//! lowest terms with a positive denominator. This module adds the canonical
//! `"num/den"` text form used by every file format, plus a few constructors.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{BoxError, Result};

pub type Rational = num_rational::BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

pub fn half() -> Rational {
    ratio(1, 2)
}

/// Canonical `"num/den"` form; integers keep the explicit `/1`.
pub fn format(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `"num/den"`, a bare integer, or a finite decimal such as `"0.875"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || BoxError::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(BoxError::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.trim_start().starts_with('-');
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mut value = Rational::new(f, scale);
        if negative {
            value = -value;
        }
        return Ok(Rational::from_integer(w) + value);
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Display-only decimal with `digits` significant digits.
pub fn to_decimal(r: &Rational, digits: usize) -> String {
    let v = to_f64(r);
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Huge numerators: fall back to a scaled division.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Rational approximation of `(2 + sqrt 2) / 4` with absolute error below
/// `10^-digits`. Built from an exact integer square root, so the result is
/// reproducible across platforms.
pub fn alpha_quantum(digits: u32) -> Rational {
    let scale = num_traits::pow(BigUint::from(10u32), digits as usize);
    let root = (BigUint::from(2u32) * &scale * &scale).sqrt();
    let num = BigInt::from(BigUint::from(2u32) * &scale + root);
    let den = BigInt::from(BigUint::from(4u32) * scale);
    Rational::new(num, den)
}

pub const ALPHA_QUANTUM_DIGITS: u32 = 9;

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_is_lowest_terms() {
        assert_eq!(format(&ratio(6, -8)), "-3/4");
        assert_eq!(format(&int(1)), "1/1");
        assert_eq!(format(&zero()), "0/1");
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse("5/8").unwrap(), ratio(5, 8));
        assert_eq!(parse(" 10/4 ").unwrap(), ratio(5, 2));
        assert_eq!(parse("3").unwrap(), int(3));
        assert_eq!(parse("0.875").unwrap(), ratio(7, 8));
        assert_eq!(parse("-0.5").unwrap(), ratio(-1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
        assert!(parse("1.").is_err());
    }

    #[test]
    fn alpha_quantum_is_close() {
        let aq = alpha_quantum(ALPHA_QUANTUM_DIGITS);
        let exact = (2.0 + 2f64.sqrt()) / 4.0;
        assert!((to_f64(&aq) - exact).abs() < 1e-9);
        // (4a - 2)^2 should be just below 2.
        let t = int(4) * &aq - int(2);
        let sq = &t * &t;
        assert!(sq < int(2));
        assert!(int(2) - sq < ratio(1, 100_000_000));
    }

    #[test]
    fn decimal_display() {
        assert_eq!(to_decimal(&ratio(29, 32), 15), "0.90625");
        assert_eq!(to_decimal(&ratio(1, 3), 6), "0.333333");
        assert_eq!(to_decimal(&int(1), 15), "1");
    }
}
