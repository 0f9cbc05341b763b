//! The additive functional equation `F(x, z) + F(y, z) = F(x + y, z)` on
//! the triples where conjunction and disjoint union interact.
//!
//! A triple `(x, y, z)` is R-constrained when `x = Bel(V∩V₁|V∩U)`,
//! `y = Bel(V∩V₂|V∩U)` and `z = Bel(V|U)` for disjoint `V₁, V₂`. Values given
//! `A = V∩U` only see intersections with `A`, so it suffices to enumerate
//! `A ⊆ U` and disjoint `B₁, B₂ ⊆ A`: every world is outside `U`, in `U∖A`,
//! in `B₁`, in `B₂`, or in the rest of `A`.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::cox::pairs::PairTable;
use crate::domain::ValueIndex;
use crate::event::EventSet;
use crate::scalar::Scalar;

/// Witness sets for an R-constrained triple, with `V = A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RWitness {
    pub u: EventSet,
    pub a: EventSet,
    pub b1: EventSet,
    pub b2: EventSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RTriple {
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub witness: RWitness,
}

/// Calls `f` for every state with `A ≠ ∅`, grouped by `U` (in parallel
/// across `U`).
fn par_states<T: Send>(
    n: usize,
    init: impl Fn() -> T + Sync + Send,
    f: impl Fn(&mut T, RWitness) + Sync + Send,
) -> Vec<T> {
    let tops: Vec<EventSet> = EventSet::full(n).subsets().skip(1).collect();
    tops.par_iter()
        .map(|&u| {
            let mut acc = init();
            for a in u.subsets().skip(1) {
                for b1 in a.subsets() {
                    for b2 in (a - b1).subsets() {
                        f(&mut acc, RWitness { u, a, b1, b2 });
                    }
                }
            }
            acc
        })
        .collect()
}

pub fn triple_of<S: Scalar>(idx: &ValueIndex<S>, w: &RWitness) -> (u32, u32, u32) {
    (idx.id(w.b1, w.a), idx.id(w.b2, w.a), idx.id(w.a, w.u))
}

/// Number of states the enumeration visits: `5^n − 2^n`.
pub fn state_count(n: usize) -> u64 {
    5u64.pow(n as u32) - 2u64.pow(n as u32)
}

/// Distinct triples with their smallest witness, sorted by `(x, y, z)`.
pub fn enumerate_r_constrained<S: Scalar>(idx: &ValueIndex<S>) -> Vec<RTriple> {
    let parts = par_states(idx.world_count(), FxHashMap::<(u32, u32, u32), RWitness>::default, |m, w| {
        let t = triple_of(idx, &w);
        m.entry(t).and_modify(|old| *old = (*old).min(w)).or_insert(w);
    });
    let mut merged: FxHashMap<(u32, u32, u32), RWitness> = FxHashMap::default();
    for part in parts {
        for (t, w) in part {
            merged.entry(t).and_modify(|old| *old = (*old).min(w)).or_insert(w);
        }
    }
    let mut out: Vec<RTriple> =
        merged.into_iter().map(|((x, y, z), witness)| RTriple { x, y, z, witness }).collect();
    out.sort_unstable_by_key(|t| (t.x, t.y, t.z));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Eq7FailureKind {
    /// A pair `(Bel(B|A), Bel(A|U))` is not a key, or maps elsewhere.
    MissingKey,
    /// `Bel(B₁∪B₂|A) ≠ Bel(B₁|A) + Bel(B₂|A)`, so `x + y` is not the
    /// first coordinate of the third lookup.
    SumNotAdditive,
    /// `F(x, z) + F(y, z) ≠ F(x + y, z)`.
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Eq7Failure {
    pub kind: Eq7FailureKind,
    pub witness: RWitness,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Eq7Report {
    pub states: u64,
    pub lookups: u64,
    pub holds: bool,
    pub failure: Option<Eq7Failure>,
}

/// Checks the equation on every R-constrained state.
///
/// The three lookups for `(B₁, B₂)` are the keys of the chains
/// `U ⊇ A ⊇ B₁`, `U ⊇ A ⊇ B₂`, `U ⊇ A ⊇ B₁∪B₂`. They are verified once per
/// `(U, A, B)` (`4^n` lookups, each must return `Bel(B|U)`), after which
/// the equation for all disjoint pairs is an exact numerator identity over
/// the shared denominator `f(U)`.
pub fn verify_eq7<S: Scalar>(idx: &ValueIndex<S>, table: &PairTable) -> Eq7Report {
    let n = idx.world_count();
    let tops: Vec<EventSet> = EventSet::full(n).subsets().skip(1).collect();
    let parts: Vec<(u64, u64, Option<Eq7Failure>)> = tops
        .par_iter()
        .map(|&u| {
            let (mut states, mut lookups) = (0u64, 0u64);
            for a in u.subsets().skip(1) {
                let z = idx.id(a, u);
                for b in a.subsets() {
                    lookups += 1;
                    if table.get(idx.id(b, a), z) != Some(idx.id(b, u)) {
                        let witness = RWitness { u, a, b1: b, b2: EventSet::EMPTY };
                        return (states, lookups, Some(Eq7Failure { kind: Eq7FailureKind::MissingKey, witness }));
                    }
                }
                for b1 in a.subsets() {
                    let (x_a, x_u) = (idx.frac_at(b1, a), idx.frac_at(b1, u));
                    for b2 in (a - b1).subsets() {
                        states += 1;
                        let witness = RWitness { u, a, b1, b2 };
                        let s = b1 | b2;
                        if x_a.num + idx.frac_at(b2, a).num != idx.frac_at(s, a).num {
                            return (states, lookups, Some(Eq7Failure { kind: Eq7FailureKind::SumNotAdditive, witness }));
                        }
                        if x_u.num + idx.frac_at(b2, u).num != idx.frac_at(s, u).num {
                            return (states, lookups, Some(Eq7Failure { kind: Eq7FailureKind::Mismatch, witness }));
                        }
                    }
                }
            }
            (states, lookups, None)
        })
        .collect();
    let states = parts.iter().map(|p| p.0).sum();
    let lookups = parts.iter().map(|p| p.1).sum();
    let failure = parts.into_iter().find_map(|p| p.2);
    Eq7Report { states, lookups, holds: failure.is_none(), failure }
}

/// Direct version for small structures: looks up all three keys per state
/// and compares the sum of values.
pub fn verify_eq7_direct<S: Scalar>(idx: &ValueIndex<S>, table: &PairTable) -> Option<Eq7Failure> {
    let found = par_states(idx.world_count(), || None, |first: &mut Option<Eq7Failure>, w| {
        if first.is_some() {
            return;
        }
        let (x, y, z) = triple_of(idx, &w);
        let xy = idx.id(w.b1 | w.b2, w.a);
        let fail = |kind| Some(Eq7Failure { kind, witness: w });
        if idx.value(x).clone() + idx.value(y) != *idx.value(xy) {
            *first = fail(Eq7FailureKind::SumNotAdditive);
            return;
        }
        match (table.get(x, z), table.get(y, z), table.get(xy, z)) {
            (Some(p), Some(q), Some(r)) => {
                if idx.value(p).clone() + idx.value(q) != *idx.value(r) {
                    *first = fail(Eq7FailureKind::Mismatch);
                }
            }
            _ => *first = fail(Eq7FailureKind::MissingKey),
        }
    });
    found.into_iter().flatten().next()
}

/// A grid point `(i/r, j/r, k/r)` with `i + j ≤ r` where a tabulated total
/// function is not additive in its first argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdditivityGap<S> {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    /// `F(x, z) + F(y, z)`.
    pub lhs: S,
    /// `F(x + y, z)`.
    pub rhs: S,
}

/// First non-additive grid point of `grid[i][k] = F(i/r, k/r)`.
pub fn additivity_gap<S: Scalar>(grid: &[Vec<S>]) -> Option<AdditivityGap<S>> {
    let r = grid.len().checked_sub(1)?;
    for k in 1..=r {
        for i in 1..=r {
            for j in 1..=(r - i) {
                let lhs = grid[i][k].clone() + &grid[j][k];
                let rhs = grid[i + j][k].clone();
                if lhs != rhs {
                    return Some(AdditivityGap { i: i as u32, j: j as u32, k: k as u32, lhs, rhs });
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::constructions::{halpern_probability, small_perturbed};
    use crate::domain::ValueKind;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn toy_structure_satisfies_the_equation() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let r = verify_eq7(&idx, &t);
        assert!(r.holds);
        assert_eq!(r.states, state_count(4));
        assert_eq!(r.lookups, 4u64.pow(4) - 2u64.pow(4));
        assert_eq!(verify_eq7_direct(&idx, &t), None);
    }

    #[test]
    fn enumeration_covers_zero_second_argument() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let all = enumerate_r_constrained(&idx);
        assert!(all.iter().any(|t| t.y == idx.zero_id()));
        for t in &all {
            assert_eq!(triple_of(&idx, &t.witness), (t.x, t.y, t.z));
        }
    }

    #[test]
    fn first_block_triple() {
        let s = halpern_probability::<Rational>();
        let u = s.event(&["w1", "w2", "w3"]);
        let w = RWitness { u, a: s.event(&["w1", "w2"]), b1: s.event(&["w1"]), b2: s.event(&["w2"]) };
        assert_eq!(s.bel_eval(w.b1, w.a).unwrap(), q(3, 5));
        assert_eq!(s.bel_eval(w.b2, w.a).unwrap(), q(2, 5));
        assert_eq!(s.bel_eval(w.a, w.u).unwrap(), q(5, 11));
    }

    #[test]
    fn broken_table_is_caught() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let bel = PairTable::build(&idx, s.trigger()).unwrap();
        // a probability-valued table does not describe the perturbed values
        let pr = ValueIndex::build(&s, ValueKind::Probability).unwrap();
        let wrong = PairTable::build(&pr, s.trigger()).unwrap();
        assert!(verify_eq7(&idx, &bel).holds);
        assert!(!verify_eq7(&idx, &wrong).holds);
    }

    #[test]
    fn additivity_gap_on_grids() {
        let product: Vec<Vec<Rational>> = (0..=4).map(|i| (0..=4).map(|k| q(i * k, 16)).collect()).collect();
        assert_eq!(additivity_gap(&product), None);
        let square: Vec<Vec<Rational>> = (0..=4).map(|i| (0..=4).map(|k| q(i * i * k, 64)).collect()).collect();
        let g = additivity_gap(&square).unwrap();
        assert_eq!((g.i, g.j, g.k), (1, 1, 1));
    }
}
