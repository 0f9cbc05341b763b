//! Choosing the perturbation size and re-checking that it is small enough.

use serde::Serialize;

use crate::domain::{BeliefStructure, ValueIndex, ValueKind};
use crate::error::DomainError;
use crate::event::EventSet;
use crate::scalar::{exact, Scalar};

/// How a perturbation size was obtained for a shift pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct DeltaChoice<S> {
    /// Minimum positive gap between distinct conditional probabilities.
    #[serde(serialize_with = "exact::one")]
    pub gamma: S,
    #[serde(serialize_with = "exact::one")]
    pub delta: S,
    /// `C / f(W′)`: the worst-case shift of any conditional value per unit δ.
    #[serde(serialize_with = "exact::one")]
    pub shift_ratio: S,
    /// True when δ had to be taken smaller than γ.
    pub scaled: bool,
}

/// Minimum positive gap of the conditional probabilities of `weights`.
/// This is the δ used when a single block is perturbed by ±δ.
pub fn select_delta<S: Scalar>(weights: &[S]) -> Result<S, DomainError> {
    let labels = (0..weights.len()).map(|i| format!("w{i}")).collect();
    let s = BeliefStructure::probability(labels, weights.to_vec())?;
    let idx = ValueIndex::build(&s, ValueKind::Probability)?;
    idx.min_gap().ok_or(DomainError::DegenerateDomain)
}

/// Largest partial sum `|Σ_{T} shift|` over subsets `T` of the trigger.
pub fn shift_constant<S: Scalar>(shift: &[S], trigger: EventSet) -> S {
    let (mut pos, mut neg) = (S::zero(), S::zero());
    for i in trigger.indices() {
        if shift[i] > S::zero() {
            pos = pos + &shift[i];
        } else {
            neg = neg - &shift[i];
        }
    }
    pos.max(neg)
}

/// Picks δ for `f′ = f + δ·shift`. Starts from γ and shrinks it only when
/// the shift bound `δ·C/f(W′) < γ/2` or positivity of `f′` would fail.
pub fn select_delta_for_shift<S: Scalar>(
    base: &[S],
    shift: &[S],
    trigger: EventSet,
) -> Result<DeltaChoice<S>, DomainError> {
    let gamma = select_delta(base)?;
    let c = shift_constant(shift, trigger);
    let mass = trigger.indices().fold(S::zero(), |acc, i| acc + &base[i]);
    if c.is_zero() || mass.is_zero() {
        return Ok(DeltaChoice { delta: gamma.clone(), gamma, shift_ratio: S::zero(), scaled: false });
    }
    let ratio = c.clone() / &mass;
    let two = S::from_int(2);
    let mut delta = gamma.clone();
    let mut scaled = false;
    if ratio.clone() * &two >= S::one() {
        delta = gamma.clone() * &mass / (c * S::from_int(4));
        scaled = true;
    }
    for (w, s) in base.iter().zip(shift) {
        if *s < S::zero() {
            let cap = w.clone() / (S::zero() - s.clone()) / &two;
            if cap < delta {
                delta = cap;
                scaled = true;
            }
        }
    }
    Ok(DeltaChoice { gamma, delta, shift_ratio: ratio, scaled })
}

/// Builds `f′ = f + δ·shift` and the resulting structure.
pub fn perturb<S: Scalar>(
    worlds: Vec<String>,
    base: Vec<S>,
    shift: &[S],
    trigger: EventSet,
    delta: S,
) -> Result<BeliefStructure<S>, DomainError> {
    let perturbed = base.iter().zip(shift).map(|(w, s)| w.clone() + s.clone() * &delta).collect();
    BeliefStructure::new(worlds, base, perturbed, trigger, delta)
}

/// Outcome of the strict-order preservation check between `Pr` and `Bel`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderPreservation {
    pub holds: bool,
    /// Number of distinct probability values (order classes).
    pub classes: usize,
    /// `(V, U, V′, U′)` with `Pr(V|U) > Pr(V′|U′)` but `Bel(V|U) ≤ Bel(V′|U′)`.
    pub violation: Option<[EventSet; 4]>,
}

/// Exhaustively checks `Pr(V|U) > Pr(V′|U′) ⇒ Bel(V|U) > Bel(V′|U′)`.
///
/// Groups nested pairs by probability id; the implication holds iff the
/// largest belief id of each class is below the smallest of the next one.
pub fn check_order_preservation<S: Scalar>(pr: &ValueIndex<S>, bel: &ValueIndex<S>) -> OrderPreservation {
    let k = pr.len();
    let mut lo = vec![u32::MAX; k];
    let mut hi = vec![0u32; k];
    for (a, u) in pr.nested_pairs() {
        let (p, b) = (pr.id(a, u) as usize, bel.id(a, u));
        lo[p] = lo[p].min(b);
        hi[p] = hi[p].max(b);
    }
    let bad = (0..k.saturating_sub(1)).find(|&p| hi[p] >= lo[p + 1]);
    let violation = bad.map(|p| {
        let find = |class: usize, target: u32| {
            pr.nested_pairs()
                .find(|&(a, u)| pr.id(a, u) as usize == class && bel.id(a, u) == target)
                .expect("class extremum is attained")
        };
        let (v, u) = find(p + 1, lo[p + 1]);
        let (v2, u2) = find(p, hi[p]);
        [v, u, v2, u2]
    });
    OrderPreservation { holds: violation.is_none(), classes: k, violation }
}

/// `max |Bel(V|U) − Pr(V|U)|` over all nested pairs.
pub fn max_shift<S: Scalar>(pr: &ValueIndex<S>, bel: &ValueIndex<S>) -> S {
    pr.nested_pairs()
        .map(|(a, u)| pr.frac_at(a, u).abs_diff_same_den(&bel.frac_at(a, u)))
        .max()
        .map(|f| f.to_scalar())
        .unwrap_or_else(S::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn uniform_pair_has_gap_one_half() {
        assert_eq!(select_delta(&[q(1, 1), q(1, 1)]).unwrap(), q(1, 2));
    }

    #[test]
    fn single_world_gap_is_one() {
        // values {0, 1}
        assert_eq!(select_delta(&[q(7, 1)]).unwrap(), q(1, 1));
    }

    #[test]
    fn large_shift_ratio_forces_scaling() {
        let base = vec![q(1, 1), q(1, 1), q(1, 1)];
        let shift = vec![q(-1, 1), q(1, 1), q(0, 1)];
        let trig = EventSet::from_indices([0, 1]);
        let choice = select_delta_for_shift(&base, &shift, trig).unwrap();
        assert!(choice.scaled);
        assert_eq!(choice.shift_ratio, q(1, 2));
        let s = perturb(vec!["a".into(), "b".into(), "c".into()], base, &shift, trig, choice.delta).unwrap();
        let pr = ValueIndex::build(&s, ValueKind::Probability).unwrap();
        let bel = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        assert!(check_order_preservation(&pr, &bel).holds);
    }

    #[test]
    fn oversized_delta_is_caught() {
        let base = vec![q(1, 1), q(2, 1), q(4, 1)];
        let shift = vec![q(-1, 1), q(1, 1), q(0, 1)];
        let trig = EventSet::from_indices([0, 1]);
        let s = perturb(vec!["a".into(), "b".into(), "c".into()], base, &shift, trig, q(9, 10)).unwrap();
        let pr = ValueIndex::build(&s, ValueKind::Probability).unwrap();
        let bel = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let check = check_order_preservation(&pr, &bel);
        assert!(!check.holds);
        let [v, u, v2, u2] = check.violation.unwrap();
        assert!(s.cond_prob(v, u).unwrap() > s.cond_prob(v2, u2).unwrap());
        assert!(s.bel_eval(v, u).unwrap() <= s.bel_eval(v2, u2).unwrap());
    }
}
