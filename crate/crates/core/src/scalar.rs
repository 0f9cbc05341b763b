//! Exact scalar abstraction.
//!
//! Every belief and probability value in the engine is an exact rational.
//! The core is written against [`Scalar`], which any [`num_rational::Ratio`]
//! over a signed integer type satisfies. The arbitrary-precision instance
//! ([`crate::Rational`]) is the default; `Ratio<i128>` is usable for small
//! structures and panics on overflow in every build profile of this
//! workspace (`overflow-checks = true`).

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseScalarError {
    #[error("empty number")]
    Empty,
    #[error("invalid character in number {0:?}")]
    InvalidDigit(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
    #[error("number {0:?} is not representable in the selected scalar type")]
    Overflow(String),
}

/// An exact ordered field element.
pub trait Scalar:
    Clone
    + Ord
    + Hash
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
{
    /// Builds `numer / denom`, or `None` when the value does not fit.
    fn from_big_ratio(numer: BigInt, denom: BigInt) -> Option<Self>;

    fn to_big_rational(&self) -> BigRational;

    fn from_int(v: i64) -> Self {
        Self::from_big_ratio(BigInt::from(v), BigInt::one()).expect("i64 fits every scalar type")
    }

    /// `10^exp` for possibly negative `exp`.
    fn pow10(exp: i32) -> Option<Self> {
        let p = num_traits::pow(BigInt::from(10), exp.unsigned_abs() as usize);
        if exp >= 0 {
            Self::from_big_ratio(p, BigInt::one())
        } else {
            Self::from_big_ratio(BigInt::one(), p)
        }
    }

    /// Parses `[sign]digits[/digits]` or a finite decimal `[sign]digits.digits`.
    fn parse_exact(text: &str) -> Result<Self, ParseScalarError> {
        let r = parse_big_rational(text)?;
        let (n, d) = r.into_raw();
        Self::from_big_ratio(n, d).ok_or_else(|| ParseScalarError::Overflow(text.to_string()))
    }

    fn to_f64_lossy(&self) -> f64 {
        let r = self.to_big_rational();
        big_ratio_to_f64(&r)
    }

    /// Truncated decimal expansion with `digits` fractional digits.
    fn decimal_string(&self, digits: usize) -> String {
        let r = self.to_big_rational();
        let neg = r.is_negative();
        let abs = r.abs();
        let scale = num_traits::pow(BigInt::from(10), digits);
        let scaled = (abs.numer() * &scale) / abs.denom();
        let (int_part, frac_part) = scaled.div_rem(&scale);
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&int_part.to_string());
        if digits > 0 {
            let frac = frac_part.to_string();
            out.push('.');
            for _ in frac.len()..digits {
                out.push('0');
            }
            out.push_str(&frac);
        }
        out
    }
}

impl<T> Scalar for Ratio<T>
where
    T: Integer
        + Clone
        + Signed
        + Hash
        + Debug
        + Display
        + Send
        + Sync
        + 'static
        + Into<BigInt>
        + TryFrom<BigInt>,
{
    fn from_big_ratio(numer: BigInt, denom: BigInt) -> Option<Self> {
        if denom.is_zero() {
            return None;
        }
        let r = BigRational::new(numer, denom);
        let (n, d) = r.into_raw();
        let n = T::try_from(n).ok()?;
        let d = T::try_from(d).ok()?;
        Some(Ratio::new_raw(n, d))
    }

    fn to_big_rational(&self) -> BigRational {
        BigRational::new_raw(self.numer().clone().into(), self.denom().clone().into())
    }
}

/// Serde helpers writing scalars as exact `p/q` strings.
pub mod exact {
    use serde::ser::{SerializeSeq, Serializer};

    use super::Scalar;

    pub fn one<S: Scalar, Z: Serializer>(v: &S, z: Z) -> Result<Z::Ok, Z::Error> {
        z.collect_str(v)
    }

    pub fn grid<S: Scalar, Z: Serializer>(rows: &[Vec<S>], z: Z) -> Result<Z::Ok, Z::Error> {
        let mut seq = z.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>())?;
        }
        seq.end()
    }

    pub fn pairs<S: Scalar, Z: Serializer>(v: &Option<Vec<(S, S)>>, z: Z) -> Result<Z::Ok, Z::Error> {
        match v {
            None => z.serialize_none(),
            Some(list) => {
                let mut seq = z.serialize_seq(Some(list.len()))?;
                for (a, b) in list {
                    seq.serialize_element(&[a.to_string(), b.to_string()])?;
                }
                seq.end()
            }
        }
    }
}

pub(crate) fn parse_big_rational(text: &str) -> Result<BigRational, ParseScalarError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(ParseScalarError::Empty);
    }
    let (neg, body) = match t.as_bytes()[0] {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let digits = |s: &str| -> Result<BigInt, ParseScalarError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseScalarError::InvalidDigit(text.to_string()));
        }
        Ok(s.parse::<BigInt>().expect("validated digits"))
    };
    let value = if let Some((n, d)) = body.split_once('/') {
        let n = digits(n)?;
        let d = digits(d)?;
        if d.is_zero() {
            return Err(ParseScalarError::ZeroDenominator(text.to_string()));
        }
        BigRational::new(n, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        let int = if int.is_empty() { BigInt::zero() } else { digits(int)? };
        let f = digits(frac)?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        BigRational::new(int * &scale + f, scale)
    } else {
        BigRational::from_integer(digits(body)?)
    };
    Ok(if neg { -value } else { value })
}

fn big_ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    // Shift both parts down to ~60 significant bits before dividing.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(f64::NAN);
    n / d * 2f64.powi((shift_n - shift_d) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn parses_integers_fractions_and_decimals() {
        assert_eq!(Rational::parse_exact("3").unwrap(), q(3, 1));
        assert_eq!(Rational::parse_exact("1/100000").unwrap(), q(1, 100_000));
        assert_eq!(Rational::parse_exact("-6/4").unwrap(), q(-3, 2));
        assert_eq!(Rational::parse_exact("0.00001").unwrap(), q(1, 100_000));
        assert_eq!(Rational::parse_exact("5.99999").unwrap(), q(599_999, 100_000));
        assert_eq!(Rational::parse_exact("+.5").unwrap(), q(1, 2));
    }

    #[test]
    fn rejects_malformed_numbers() {
        assert_eq!(Rational::parse_exact(""), Err(ParseScalarError::Empty));
        assert!(matches!(Rational::parse_exact("1e-5"), Err(ParseScalarError::InvalidDigit(_))));
        assert!(matches!(Rational::parse_exact("1/0"), Err(ParseScalarError::ZeroDenominator(_))));
        assert!(matches!(Rational::parse_exact("3/"), Err(ParseScalarError::InvalidDigit(_))));
        assert!(matches!(Rational::parse_exact("0x10"), Err(ParseScalarError::InvalidDigit(_))));
    }

    #[test]
    fn large_weights_exceed_machine_words_but_stay_exact() {
        let w = Rational::parse_exact("19000000019000000000000000000").unwrap();
        assert!(w > Rational::from_int(i64::MAX));
        type Small = Ratio<i64>;
        assert!(matches!(
            Small::parse_exact("19000000019000000000000000000"),
            Err(ParseScalarError::Overflow(_))
        ));
    }

    #[test]
    fn decimal_rendering_truncates() {
        assert_eq!(q(1, 3).decimal_string(4), "0.3333");
        assert_eq!(q(-7, 2).decimal_string(2), "-3.50");
        assert_eq!(q(1, 1000).decimal_string(6), "0.001000");
        assert!((q(2, 3).to_f64_lossy() - 0.666_666_666).abs() < 1e-6);
    }

    #[test]
    fn pow10_handles_negative_exponents() {
        assert_eq!(Rational::pow10(-5).unwrap(), q(1, 100_000));
        assert_eq!(Rational::pow10(4).unwrap(), q(10_000, 1));
        assert!(Ratio::<i64>::pow10(30).is_none());
    }
}
