//! The twelve-world counterexample, its thirteen-world variant, and a few
//! small structures used in tests.

use crate::domain::delta::{perturb, select_delta_for_shift};
use crate::domain::BeliefStructure;
use crate::error::DomainError;
use crate::event::EventSet;
use crate::scalar::Scalar;
use crate::Structure;

fn weight<S: Scalar>(mantissa: i64, exp: i32) -> S {
    S::from_int(mantissa) * S::pow10(exp).expect("weight magnitude fits the scalar type")
}

/// `(mantissa, exponent)` of the twelve base weights.
pub const HALPERN_WEIGHTS: [(i64, i32); 12] = [
    (3, 0),
    (2, 0),
    (6, 0),
    (5, 4),
    (6, 4),
    (8, 4),
    (3, 8),
    (8, 8),
    (8, 8),
    (3, 18),
    (2, 18),
    (14, 18),
];

pub fn halpern_labels() -> Vec<String> {
    (1..=12).map(|i| format!("w{i}")).collect()
}

pub fn halpern_base<S: Scalar>() -> Vec<S> {
    HALPERN_WEIGHTS.iter().map(|&(m, e)| weight(m, e)).collect()
}

/// `f′ − f` per unit δ: `w10` loses `10^18`, `w11` gains it.
pub fn halpern_shift<S: Scalar>() -> Vec<S> {
    let mut shift = vec![S::zero(); 12];
    shift[9] = weight(-1, 18);
    shift[10] = weight(1, 18);
    shift
}

pub fn halpern_trigger() -> EventSet {
    EventSet::from_indices([9, 10, 11])
}

/// The four magnitude blocks `{w1,w2,w3}`, …, `{w10,w11,w12}`.
pub fn halpern_blocks() -> Vec<EventSet> {
    (0..4).map(|b| EventSet::from_indices([3 * b, 3 * b + 1, 3 * b + 2])).collect()
}

/// Twelve-world structure with δ set to the minimum probability gap.
pub fn build_halpern() -> Structure {
    build_halpern_generic().expect("the twelve-world construction is valid")
}

pub fn build_halpern_generic<S: Scalar>() -> Result<BeliefStructure<S>, DomainError> {
    let base = halpern_base::<S>();
    let shift = halpern_shift::<S>();
    let choice = select_delta_for_shift(&base, &shift, halpern_trigger())?;
    build_halpern_with_delta(choice.delta)
}

/// Twelve-world structure with a caller-chosen δ (order preservation is
/// not checked here).
pub fn build_halpern_with_delta<S: Scalar>(delta: S) -> Result<BeliefStructure<S>, DomainError> {
    perturb(halpern_labels(), halpern_base(), &halpern_shift(), halpern_trigger(), delta)?
        .with_blocks(halpern_blocks())
}

/// The same weights without perturbation: a probability structure.
pub fn halpern_probability<S: Scalar>() -> BeliefStructure<S> {
    BeliefStructure::probability(halpern_labels(), halpern_base())
        .and_then(|s| s.with_blocks(halpern_blocks()))
        .expect("base weights are positive")
}

pub fn fine13_labels() -> Vec<String> {
    (0..=12).map(|i| format!("w{i}")).collect()
}

/// Base weights with `w0` at index 0 taking `10^-5` from `w3, w6, w9, w12`.
pub fn fine13_base<S: Scalar>() -> Vec<S> {
    let eps: S = weight(1, -5);
    let mut base = vec![eps.clone()];
    base.extend(halpern_base::<S>());
    for i in [3, 6, 9, 12] {
        base[i] = base[i].clone() - &eps;
    }
    base
}

pub fn fine13_shift<S: Scalar>() -> Vec<S> {
    let mut shift = vec![S::zero()];
    shift.extend(halpern_shift::<S>());
    shift
}

pub fn fine13_trigger() -> EventSet {
    EventSet::from_indices([0, 10, 11, 12])
}

/// The twelve-world blocks shifted by one, plus `{w0}` as its own block.
pub fn fine13_blocks() -> Vec<EventSet> {
    let mut blocks = vec![EventSet::singleton(0)];
    blocks.extend(halpern_blocks().into_iter().map(|b| EventSet::from_bits(b.bits() << 1)));
    blocks
}

pub fn build_fine13() -> Structure {
    build_fine13_generic().expect("the thirteen-world construction is valid")
}

pub fn build_fine13_generic<S: Scalar>() -> Result<BeliefStructure<S>, DomainError> {
    let base = fine13_base::<S>();
    let shift = fine13_shift::<S>();
    let choice = select_delta_for_shift(&base, &shift, fine13_trigger())?;
    perturb(fine13_labels(), base, &shift, fine13_trigger(), choice.delta)?.with_blocks(fine13_blocks())
}

/// Four worlds `a..d` with weights 1, 2, 5, 11 and `1/10` moved from `b` to
/// `d` inside the trigger `{b, c, d}`. Small enough that its pair table is
/// well defined.
pub fn small_perturbed() -> Structure {
    let q = |n: i64, d: i64| crate::Rational::new(n.into(), d.into());
    BeliefStructure::new(
        ["a", "b", "c", "d"].map(String::from).to_vec(),
        vec![q(1, 1), q(2, 1), q(5, 1), q(11, 1)],
        vec![q(1, 1), q(19, 10), q(5, 1), q(111, 10)],
        EventSet::from_indices([1, 2, 3]),
        q(1, 10),
    )
    .expect("valid toy structure")
}
