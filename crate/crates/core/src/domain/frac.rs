//! Unreduced fixed-width fractions for the hot enumeration paths.
//!
//! Every conditional value of a structure is `N/D` where `N` and `D` are
//! subset sums of the weights scaled by the common denominator `L` of all
//! weights. Keeping `(N, D)` unreduced avoids a gcd per value; comparison is
//! by exact 512-bit cross multiplication.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use ruint::Uint;

use crate::error::DomainError;
use crate::scalar::Scalar;

pub type Wide = Uint<256, 4>;
pub type Prod = Uint<512, 8>;
type Tri = Uint<768, 12>;
type Quad = Uint<1024, 16>;

/// Scaled subset sums may use at most this many bits, leaving headroom for
/// sums of two values.
pub const MAX_SCALED_BITS: u64 = 254;

/// `num / den` with `den > 0`, not necessarily in lowest terms.
#[derive(Clone, Copy, Debug)]
pub struct Frac {
    pub num: Wide,
    pub den: Wide,
}

impl Frac {
    pub const ZERO: Frac = Frac { num: Wide::ZERO, den: Wide::ONE };

    pub fn new(num: Wide, den: Wide) -> Self {
        debug_assert!(den != Wide::ZERO);
        Frac { num, den }
    }

    #[inline]
    fn cross(&self, other: &Frac) -> (Prod, Prod) {
        (self.num.widening_mul(other.den), other.num.widening_mul(self.den))
    }

    pub fn is_zero(&self) -> bool {
        self.num == Wide::ZERO
    }

    /// `self + other` for fractions with the same denominator.
    pub fn add_same_den(&self, other: &Frac) -> Frac {
        debug_assert_eq!(self.den, other.den);
        Frac { num: self.num + other.num, den: self.den }
    }

    /// `|self − other|` for fractions with the same denominator.
    pub fn abs_diff_same_den(&self, other: &Frac) -> Frac {
        debug_assert_eq!(self.den, other.den);
        let num = if self.num >= other.num { self.num - other.num } else { other.num - self.num };
        Frac { num, den: self.den }
    }

    /// Lowest-terms numerator and denominator.
    pub fn reduced(&self) -> (BigUint, BigUint) {
        let g = self.num.gcd(self.den);
        (BigUint::from(self.num / g), BigUint::from(self.den / g))
    }

    pub fn to_scalar<S: Scalar>(&self) -> S {
        let (n, d) = self.reduced();
        S::from_big_ratio(BigInt::from(n), BigInt::from(d)).expect("value fits the scalar type")
    }
}

impl PartialEq for Frac {
    fn eq(&self, other: &Frac) -> bool {
        let (a, b) = self.cross(other);
        a == b
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Frac) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frac {
    #[inline]
    fn cmp(&self, other: &Frac) -> Ordering {
        let (a, b) = self.cross(other);
        a.cmp(&b)
    }
}

/// Whether `x · y = w`.
pub fn product_equals(x: &Frac, y: &Frac, w: &Frac) -> bool {
    let top: Prod = x.num.widening_mul(y.num);
    let bottom: Prod = x.den.widening_mul(y.den);
    let lhs: Tri = top.widening_mul(w.den);
    let rhs: Tri = bottom.widening_mul(w.num);
    lhs == rhs
}

/// Compares `x1 + y1` with `x2 + y2`.
pub fn cmp_sums(x1: &Frac, y1: &Frac, x2: &Frac, y2: &Frac) -> Ordering {
    let sum = |x: &Frac, y: &Frac| -> (Prod, Prod) {
        let n: Prod = x.num.widening_mul(y.den);
        let m: Prod = y.num.widening_mul(x.den);
        (n + m, x.den.widening_mul(y.den))
    };
    let (n1, d1) = sum(x1, y1);
    let (n2, d2) = sum(x2, y2);
    let a: Quad = n1.widening_mul(d2);
    let b: Quad = n2.widening_mul(d1);
    a.cmp(&b)
}

/// `b − a` for `a ≤ b`, as a fraction over 512-bit parts.
#[derive(Clone, Copy, Debug)]
pub struct Gap {
    num: Prod,
    den: Prod,
}

impl Gap {
    pub fn between(a: &Frac, b: &Frac) -> Gap {
        let (x, y) = a.cross(b);
        debug_assert!(x <= y);
        Gap { num: y - x, den: a.den.widening_mul(b.den) }
    }

    pub fn to_scalar<S: Scalar>(&self) -> S {
        let n = BigInt::from(BigUint::from(self.num));
        let d = BigInt::from(BigUint::from(self.den));
        let g = n.gcd(&d);
        S::from_big_ratio(n / &g, d / g).expect("gap fits the scalar type")
    }
}

impl PartialEq for Gap {
    fn eq(&self, other: &Gap) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Gap {}

impl PartialOrd for Gap {
    fn partial_cmp(&self, other: &Gap) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Gap {
    fn cmp(&self, other: &Gap) -> Ordering {
        let a: Quad = self.num.widening_mul(other.den);
        let b: Quad = other.num.widening_mul(self.den);
        a.cmp(&b)
    }
}

/// Weights multiplied by the least common denominator of both tables.
#[derive(Clone, Debug)]
pub struct ScaledWeights {
    pub base: Vec<Wide>,
    pub perturbed: Vec<Wide>,
    pub scale: BigUint,
}

fn to_wide(v: &BigInt) -> Result<Wide, DomainError> {
    Wide::try_from(v).map_err(|_| DomainError::MagnitudeTooLarge(v.bits()))
}

impl ScaledWeights {
    pub fn new<S: Scalar>(base: &[S], perturbed: &[S]) -> Result<Self, DomainError> {
        let all: Vec<_> = base.iter().chain(perturbed).map(|w| w.to_big_rational()).collect();
        let scale = all.iter().fold(BigInt::one(), |l, r| l.lcm(r.denom()));
        let scaled = |r: &num_rational::BigRational| r.numer() * (&scale / r.denom());
        let ints: Vec<BigInt> = all.iter().map(scaled).collect();
        let total_base: BigInt = ints[..base.len()].iter().sum();
        let total_pert: BigInt = ints[base.len()..].iter().sum();
        let top = total_base.max(total_pert);
        if top.bits() > MAX_SCALED_BITS {
            return Err(DomainError::MagnitudeTooLarge(top.bits()));
        }
        if ints.iter().any(|v| v <= &BigInt::zero()) {
            // positivity is a structure invariant; reaching here is a caller bug
            panic!("scaled weights must be positive");
        }
        let wide = ints.iter().map(to_wide).collect::<Result<Vec<_>, _>>()?;
        let (b, p) = wide.split_at(base.len());
        Ok(ScaledWeights {
            base: b.to_vec(),
            perturbed: p.to_vec(),
            scale: scale.to_biguint().expect("positive"),
        })
    }
}

/// Subset sums indexed by bitmask.
pub fn wide_subset_sums(weights: &[Wide]) -> Vec<Wide> {
    let mut sums = vec![Wide::ZERO; 1usize << weights.len()];
    for s in 1..sums.len() {
        sums[s] = sums[s & (s - 1)] + weights[s.trailing_zeros() as usize];
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn f(n: u64, d: u64) -> Frac {
        Frac::new(Wide::from(n), Wide::from(d))
    }

    #[test]
    fn comparison_ignores_representation() {
        assert_eq!(f(2, 4), f(1, 2));
        assert!(f(1, 3) < f(1, 2));
        assert!(f(5, 19) > f(3, 19));
        assert_eq!(f(6, 10).to_scalar::<Rational>(), Rational::new(3.into(), 5.into()));
    }

    #[test]
    fn gaps_compare_exactly() {
        let g1 = Gap::between(&f(1, 3), &f(1, 2));
        let g2 = Gap::between(&f(1, 4), &f(1, 3));
        assert!(g2 < g1);
        assert_eq!(g2.to_scalar::<Rational>(), Rational::new(1.into(), 12.into()));
    }

    #[test]
    fn products_and_sums() {
        assert!(product_equals(&f(3, 5), &f(5, 19), &f(6, 38)));
        assert!(!product_equals(&f(3, 5), &f(5, 19), &f(2, 19)));
        assert_eq!(cmp_sums(&f(1, 2), &f(1, 3), &f(2, 3), &f(1, 6)), Ordering::Equal);
        assert_eq!(cmp_sums(&f(1, 2), &f(1, 4), &f(2, 3), &f(1, 6)), Ordering::Less);
    }

    #[test]
    fn scaling_uses_common_denominator() {
        let q = |n: i64, d: i64| Rational::new(n.into(), d.into());
        let w = ScaledWeights::new(&[q(1, 2), q(1, 3)], &[q(1, 6), q(2, 3)]).unwrap();
        assert_eq!(w.scale, BigUint::from(6u32));
        assert_eq!(w.base, vec![Wide::from(3u32), Wide::from(2u32)]);
        assert_eq!(w.perturbed, vec![Wide::from(1u32), Wide::from(4u32)]);
    }
}
