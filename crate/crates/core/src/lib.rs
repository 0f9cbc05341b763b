//! Exact verification of conditional belief functions on finite domains.
//!
//! A [`BeliefStructure`] assigns `Bel(V|U)` to every pair of events with
//! `U ≠ ∅`. The checks in this crate decide, by exhaustive exact enumeration,
//! whether such a function admits complement, disjoint-union and conjunction
//! combinators, whether the conjunction combinator can be associative, and
//! whether the function can be rescaled into a probability.
//!
//! All arithmetic is exact. The engine is generic over [`Scalar`]; the
//! aliases below fix the arbitrary-precision instance used by the CLI.

pub mod appendix;
pub mod cox;
pub mod domain;
pub mod error;
pub mod event;
pub mod fine;
pub mod functional_eq;
pub mod harness;
pub mod rescaling;
pub mod scalar;

pub use domain::{BeliefStructure, ConditionalObject, ValueIndex, ValueKind, WeightTable};
pub use error::DomainError;
pub use event::EventSet;
pub use scalar::Scalar;

/// Arbitrary-precision rational; the default scalar.
pub type Rational = num_rational::BigRational;
/// Fixed-width rational for small structures; panics on overflow.
pub type SmallRational = num_rational::Ratio<i128>;

pub type Structure = BeliefStructure<Rational>;
pub type Values = ValueIndex<Rational>;
