//! Complement and disjoint-union decomposability with `S(x) = 1 − x` and
//! `G(x, y) = x + y`.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::ValueIndex;
use crate::event::EventSet;
use crate::scalar::Scalar;

/// `Bel(V̄|U) ≠ 1 − Bel(V|U)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ComplementViolation {
    pub v: EventSet,
    pub u: EventSet,
}

/// `Bel(V ∪ V′|U) ≠ Bel(V|U) + Bel(V′|U)` for disjoint `V, V′`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AdditivityViolation {
    pub v: EventSet,
    pub v2: EventSet,
    pub u: EventSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AxiomCheck<V> {
    pub holds: bool,
    /// Number of instances examined.
    pub instances: u64,
    pub violation: Option<V>,
}

fn first_violation<V: Send>(found: Vec<Option<V>>) -> Option<V> {
    found.into_iter().flatten().next()
}

/// Exhaustive over every `V ⊆ W` and nonempty `U`.
///
/// All values over one `U` share the denominator `f(U)`, so the test is
/// `num(V∩U) + num(U∖V) = f(U)` on scaled integers.
pub fn verify_complement<S: Scalar>(idx: &ValueIndex<S>) -> AxiomCheck<ComplementViolation> {
    let full = EventSet::full(idx.world_count());
    let us: Vec<EventSet> = full.subsets().skip(1).collect();
    let found: Vec<Option<ComplementViolation>> = us
        .par_iter()
        .map(|&u| {
            full.subsets().find_map(|v| {
                let a = idx.frac_at(v & u, u);
                let c = idx.frac_at(u - v, u);
                (a.num + c.num != a.den).then_some(ComplementViolation { v, u })
            })
        })
        .collect();
    let violation = first_violation(found);
    AxiomCheck { holds: violation.is_none(), instances: (us.len() as u64) << full.len(), violation }
}

/// Exhaustive over disjoint `V, V′ ⊆ U` for every nonempty `U`: each world
/// is outside `U`, in `V`, in `V′`, or in neither, giving `4^n` cases.
/// Parts of `V, V′` outside `U` do not change any value involved.
pub fn verify_additivity<S: Scalar>(idx: &ValueIndex<S>) -> AxiomCheck<AdditivityViolation> {
    let full = EventSet::full(idx.world_count());
    let us: Vec<EventSet> = full.subsets().skip(1).collect();
    let found: Vec<(u64, Option<AdditivityViolation>)> = us
        .par_iter()
        .map(|&u| {
            let mut count = 0u64;
            for v in u.subsets() {
                let x = idx.frac_at(v, u);
                for v2 in (u - v).subsets() {
                    count += 1;
                    let y = idx.frac_at(v2, u);
                    let z = idx.frac_at(v | v2, u);
                    if x.num + y.num != z.num {
                        return (count, Some(AdditivityViolation { v, v2, u }));
                    }
                }
            }
            (count, None)
        })
        .collect();
    let instances = found.iter().map(|(c, _)| c).sum();
    let violation = first_violation(found.into_iter().map(|(_, v)| v).collect());
    AxiomCheck { holds: violation.is_none(), instances, violation }
}

/// `Bel(∅|U) = 0`, `Bel(U|U) = 1`, every value in `[0, 1]`, and
/// `Bel(V) < Bel(U)` for `V ⊊ U`. Returns the first failing `(V, U)`.
pub fn check_basic_laws<S: Scalar>(idx: &ValueIndex<S>) -> Option<(EventSet, EventSet)> {
    let full = EventSet::full(idx.world_count());
    for u in full.subsets().skip(1) {
        if idx.id(EventSet::EMPTY, u) != idx.zero_id() {
            return Some((EventSet::EMPTY, u));
        }
        if idx.id(u, u) != idx.one_id() {
            return Some((u, u));
        }
    }
    crate::rescaling::unconditional_injectivity(idx).violation
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::constructions::small_perturbed;
    use crate::domain::{BeliefStructure, ValueKind};
    use crate::Rational;

    #[test]
    fn toy_structure_is_decomposable() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let c = verify_complement(&idx);
        assert!(c.holds);
        assert_eq!(c.instances, 15 * 16);
        let a = verify_additivity(&idx);
        assert!(a.holds);
        assert_eq!(a.instances, 4u64.pow(4) - 1);
        assert_eq!(check_basic_laws(&idx), None);
    }

    #[test]
    fn complement_agrees_with_direct_evaluation() {
        let s = small_perturbed();
        let full = s.full();
        for u in full.subsets().skip(1) {
            for v in full.subsets() {
                let lhs = s.bel_eval(v.complement(4), u).unwrap();
                let rhs = Rational::from_int(1) - s.bel_eval(v, u).unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn probability_structure_is_decomposable() {
        let s = BeliefStructure::<Rational>::probability(
            vec!["a".into(), "b".into()],
            vec![Rational::from_int(1), Rational::from_int(3)],
        )
        .unwrap();
        let idx = ValueIndex::build(&s, ValueKind::Probability).unwrap();
        assert!(verify_complement(&idx).holds);
        assert!(verify_additivity(&idx).holds);
    }
}
