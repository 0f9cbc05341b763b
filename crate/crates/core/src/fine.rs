//! The comparative conditional order induced by a belief function and the
//! properties a combination function for it would need.
//!
//! `V|U ⪰ V′|U′` iff `Bel(V|U) ≥ Bel(V′|U′)`. Linearity and transitivity
//! come from the numeric order. The monotonicity conditions are statements
//! about chains and are checked on the pair table: the first compares
//! coordinatewise, the second crosses the premises, the third is strict in
//! the first coordinate when the second is positive. The order-topology
//! condition is vacuous on a finite domain and is recorded, not evaluated.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cox::assoc::{check_triple, find_witnesses, AssociativityWitness};
use crate::cox::closure::{close_keys, keyed};
use crate::cox::monotone::{check_clause, Clause, ClauseResult, Keyed};
use crate::cox::pairs::{anchored, ChainWitness, PairConflict, PairTable};
use crate::domain::{BeliefStructure, ValueIndex};
use crate::event::EventSet;
use crate::scalar::{exact, Scalar};

/// Clauses (a), (b), (c) in that order.
pub const QCC7: [Clause; 3] = [Clause::Weak, Clause::Crossed, Clause::StrictFirstPositiveSecond];

/// The order on conditional objects `V|U` agreeing with a value table.
pub struct InducedOrder<'a, S: Scalar> {
    idx: &'a ValueIndex<S>,
}

impl<'a, S: Scalar> InducedOrder<'a, S> {
    pub fn new(idx: &'a ValueIndex<S>) -> Self {
        InducedOrder { idx }
    }

    pub fn value(&self, v: EventSet, u: EventSet) -> &S {
        self.idx.eval(v, u)
    }

    /// `Greater` iff `V|U ≻ V′|U′`.
    pub fn compare(&self, a: (EventSet, EventSet), b: (EventSet, EventSet)) -> Ordering {
        self.value(a.0, a.1).cmp(self.value(b.0, b.1))
    }

    pub fn geq(&self, a: (EventSet, EventSet), b: (EventSet, EventSet)) -> bool {
        self.compare(a, b) != Ordering::Less
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpotCheck {
    pub samples: u32,
    pub holds: bool,
    /// Objects `(V, U)` of the first failing sample.
    pub failure: Option<Vec<(EventSet, EventSet)>>,
}

fn random_object(rng: &mut ChaCha8Rng, n: usize) -> (EventSet, EventSet) {
    let full = EventSet::full(n).bits();
    let u = loop {
        let u = rng.gen::<u64>() & full;
        if u != 0 {
            break u;
        }
    };
    (EventSet::from_bits(rng.gen::<u64>() & full), EventSet::from_bits(u))
}

/// Linearity and reflexivity on random pairs, transitivity on random
/// triples.
pub fn check_qcc1_qcc2<S: Scalar>(order: &InducedOrder<'_, S>, samples: u32, seed: u64) -> (SpotCheck, SpotCheck) {
    let n = order.idx.world_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut linear = SpotCheck { samples, holds: true, failure: None };
    for _ in 0..samples {
        let (a, b) = (random_object(&mut rng, n), random_object(&mut rng, n));
        if !(order.geq(a, b) || order.geq(b, a)) || !order.geq(a, a) {
            linear = SpotCheck { samples, holds: false, failure: Some(vec![a, b]) };
            break;
        }
    }
    let mut transitive = SpotCheck { samples, holds: true, failure: None };
    for _ in 0..samples {
        let mut t = [random_object(&mut rng, n), random_object(&mut rng, n), random_object(&mut rng, n)];
        // sort so that both premises hold and the conclusion is tested
        t.sort_by(|a, b| order.compare(*b, *a));
        if !(order.geq(t[0], t[1]) && order.geq(t[1], t[2])) || !order.geq(t[0], t[2]) {
            transitive = SpotCheck { samples, holds: false, failure: Some(t.to_vec()) };
            break;
        }
    }
    (linear, transitive)
}

pub fn check_qcc7(table: &PairTable, n_values: usize) -> Vec<ClauseResult> {
    check_qcc7_on_keys(&keyed(table), n_values)
}

pub fn check_qcc7_on_keys(keys: &[Keyed], n_values: usize) -> Vec<ClauseResult> {
    QCC7.iter().map(|&c| check_clause(keys, n_values, c)).collect()
}

/// The remaining clauses of the representation statement, evaluated on the
/// pair table and its commutative closure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CombinationClauses {
    /// `F(x, y) = F(y, x)` wherever both are keys; else the conflicting key.
    pub commutative: Option<(u32, u32)>,
    /// Strictly increasing in `x` for `y > 0`, on the table itself.
    pub increasing: ClauseResult,
    /// The same on the commutative closure.
    pub increasing_closed: Option<ClauseResult>,
    /// `F(1, y) = y`; else the first key breaking it.
    pub unit: Option<(u32, u32)>,
    /// `F(0, y) = 0`.
    pub zero: Option<(u32, u32)>,
}

impl CombinationClauses {
    pub fn holds(&self) -> bool {
        self.commutative.is_none()
            && self.increasing.holds
            && self.increasing_closed.as_ref().is_some_and(|c| c.holds)
            && self.unit.is_none()
            && self.zero.is_none()
    }
}

pub fn combination_clauses<S: Scalar>(idx: &ValueIndex<S>, table: &PairTable) -> CombinationClauses {
    combination_clauses_on_keys(idx, &keyed(table))
}

/// Same, from keys sorted by `(x, y)`.
pub fn combination_clauses_on_keys<S: Scalar>(idx: &ValueIndex<S>, keys: &[Keyed]) -> CombinationClauses {
    let n = idx.len();
    let (one, zero) = (idx.one_id(), idx.zero_id());
    let unit = keys.iter().find(|k| k.x == one && k.w != k.y).map(|k| (k.x, k.y));
    let zero_law = keys.iter().find(|k| k.x == zero && k.w != zero).map(|k| (k.x, k.y));
    let increasing = check_clause(keys, n, Clause::StrictFirstPositiveSecond);
    let closed = close_keys(keys);
    CombinationClauses {
        commutative: closed.as_ref().err().copied(),
        increasing,
        increasing_closed: closed.as_ref().ok().map(|d| check_clause(d, n, Clause::StrictFirstPositiveSecond)),
        unit,
        zero: zero_law,
    }
}

/// A conditional object by world labels.
type Object = (&'static [&'static str], &'static [&'static str]);

/// The five equal-value classes of the obstruction, two objects each, in
/// the order 3/5, 5/11, 11/19, 5/19, 3/11 (probability values on the
/// twelve-world structure).
pub const CLASSES: [[Object; 2]; 5] = [
    [(&["w1"], &["w1", "w2"]), (&["w10"], &["w10", "w11"])],
    [(&["w1", "w2"], &["w1", "w2", "w3"]), (&["w4"], &["w4", "w5"])],
    [(&["w4", "w5"], &["w4", "w5", "w6"]), (&["w7", "w8"], &["w7", "w8", "w9"])],
    [(&["w4"], &["w4", "w5", "w6"]), (&["w10", "w11"], &["w10", "w11", "w12"])],
    [(&["w1"], &["w1", "w2", "w3"]), (&["w7"], &["w7", "w8"])],
];

/// Chains `(u1, u2, u3)` with the classes of `u3|u2` and `u2|u1`, and the
/// class of `u3|u1` (`None` for the last two, whose results are compared).
const CHAINS: [([&str; 3], usize, usize, Option<usize>); 4] = [
    (["w4 w5 w6", "w4 w5", "w4"], 1, 2, Some(3)),
    (["w1 w2 w3", "w1 w2", "w1"], 0, 1, Some(4)),
    (["w10 w11 w12", "w10 w11", "w10"], 0, 3, None),
    (["w7 w8 w9", "w7 w8", "w7"], 4, 2, None),
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ObjectValue<S> {
    pub event: EventSet,
    pub given: EventSet,
    #[serde(serialize_with = "exact::one")]
    pub value: S,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ClassRow<S> {
    pub members: [ObjectValue<S>; 2],
    pub equal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ObstructionChain<S> {
    pub chain: ChainWitness,
    pub x_class: usize,
    pub y_class: usize,
    pub w_class: Option<usize>,
    /// `u3|u2`, `u2|u1`, `u3|u1`.
    pub objects: [ObjectValue<S>; 3],
    /// The first two objects (and the third, when it has a class) sit in
    /// their classes.
    pub consistent: bool,
}

/// Any function agreeing with the order gives the class members equal
/// values and keeps `lhs < rhs`. Chains 1 and 2 then force
/// `F(c0, F(c1, c2)) = F(c0, c3)`, which chain 3 sets to `lhs`, and
/// `F(F(c0, c1), c2) = F(c4, c2)`, which chain 4 sets to `rhs`, so no
/// associative `F` satisfies the conjunction law for that function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct Obstruction<S> {
    /// World added to every set, if any.
    pub anchor: Option<String>,
    pub classes: Vec<ClassRow<S>>,
    /// The five class values are pairwise different.
    pub classes_distinct: bool,
    pub chains: Vec<ObstructionChain<S>>,
    pub lhs: ObjectValue<S>,
    pub rhs: ObjectValue<S>,
    pub strict_gap: bool,
    /// Every conditioning set contains the anchor.
    pub within_family: bool,
}

impl<S> Obstruction<S> {
    pub fn holds(&self) -> bool {
        self.classes.iter().all(|c| c.equal)
            && self.classes_distinct
            && self.chains.iter().all(|c| c.consistent)
            && self.strict_gap
            && self.within_family
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObstructionError {
    #[error("world {0:?} not in the structure")]
    UnknownWorld(String),
    #[error("conditioning set is empty")]
    EmptyConditioning,
}

/// Builds the certificate for the order given by `value`, which must be an
/// order-preserving image of the structure's values to count as agreeing.
pub fn obstruction_with<S: Scalar, T: Scalar>(
    structure: &BeliefStructure<S>,
    anchor: Option<&str>,
    value: impl Fn(&S) -> T,
) -> Result<Obstruction<T>, ObstructionError> {
    let extra = match anchor {
        Some(a) => {
            EventSet::singleton(structure.world_index(a).ok_or_else(|| ObstructionError::UnknownWorld(a.into()))?)
        }
        None => EventSet::EMPTY,
    };
    let set = |labels: &[&str]| -> Result<EventSet, ObstructionError> {
        let mut e = extra;
        for l in labels {
            e = e | EventSet::singleton(structure.world_index(l).ok_or_else(|| ObstructionError::UnknownWorld(l.to_string()))?);
        }
        Ok(e)
    };
    let object = |v: EventSet, u: EventSet| -> Result<ObjectValue<T>, ObstructionError> {
        let b = structure.bel_eval(v, u).map_err(|_| ObstructionError::EmptyConditioning)?;
        Ok(ObjectValue { event: v, given: u, value: value(&b) })
    };
    let mut classes = Vec::new();
    for [a, b] in CLASSES {
        let m0 = object(set(a.0)?, set(a.1)?)?;
        let m1 = object(set(b.0)?, set(b.1)?)?;
        let equal = m0.value == m1.value;
        classes.push(ClassRow { members: [m0, m1], equal });
    }
    let reps: Vec<&T> = classes.iter().map(|c| &c.members[0].value).collect();
    let classes_distinct = (0..reps.len()).all(|i| (i + 1..reps.len()).all(|j| reps[i] != reps[j]));
    let mut chains = Vec::new();
    let mut within_family = true;
    for (sets, xc, yc, wc) in CHAINS {
        let [u1, u2, u3] = sets.map(|s| set(&s.split(' ').collect::<Vec<_>>()));
        let (u1, u2, u3) = (u1?, u2?, u3?);
        within_family &= extra.is_subset_of(u1) && extra.is_subset_of(u2);
        let objects = [object(u3, u2)?, object(u2, u1)?, object(u3, u1)?];
        let consistent = objects[0].value == *reps[xc]
            && objects[1].value == *reps[yc]
            && wc.is_none_or(|w| objects[2].value == *reps[w]);
        chains.push(ObstructionChain { chain: ChainWitness::new(u1, u2, u3), x_class: xc, y_class: yc, w_class: wc, objects, consistent });
    }
    let lhs = chains[2].objects[2].clone();
    let rhs = chains[3].objects[2].clone();
    let strict_gap = lhs.value < rhs.value;
    Ok(Obstruction { anchor: anchor.map(String::from), classes, classes_distinct, chains, lhs, rhs, strict_gap, within_family })
}

pub fn agreeing_obstruction<S: Scalar>(
    structure: &BeliefStructure<S>,
    anchor: Option<&str>,
) -> Result<Obstruction<S>, ObstructionError> {
    obstruction_with(structure, anchor, S::clone)
}

/// The same certificate for the agreeing function `x ↦ x²`.
pub fn replay_squared<S: Scalar>(structure: &BeliefStructure<S>, anchor: Option<&str>) -> Result<Obstruction<S>, ObstructionError> {
    obstruction_with(structure, anchor, |x| x.clone() * x)
}

/// The family of conditioning sets containing one world.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FilterFamily {
    pub anchor: usize,
    pub members: u64,
    pub intersection_closed: bool,
    pub empty_free: bool,
}

/// Checks closure exhaustively over all member pairs.
pub fn filter_family(n: usize, anchor: usize) -> FilterFamily {
    let full = EventSet::full(n);
    let members: Vec<EventSet> = full.subsets().filter(|s| s.contains(anchor)).collect();
    let member = |s: EventSet| s.contains(anchor);
    let intersection_closed = members.iter().all(|&a| members.iter().all(|&b| member(a & b)));
    FilterFamily {
        anchor,
        members: members.len() as u64,
        intersection_closed,
        empty_free: !members.iter().any(|s| s.is_empty()),
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct FineReport<S> {
    pub restricted: bool,
    pub qcc1: SpotCheck,
    pub qcc2: SpotCheck,
    /// Never evaluated: vacuous on a finite domain.
    pub qcc5_vacuous: bool,
    pub qcc7: Vec<ClauseResult>,
    pub pair_keys: usize,
    pub chains: u64,
    pub conflict: Option<PairConflict>,
    pub family: Option<FilterFamily>,
    pub clauses: Option<CombinationClauses>,
    /// Associativity failure at the obstruction triple, read off the table.
    pub associativity: Option<AssociativityWitness>,
    /// Number of associativity failures anywhere in the table and the
    /// first one, when the exhaustive search was requested.
    pub witness_search: Option<(usize, Option<AssociativityWitness>)>,
    pub obstruction: Obstruction<S>,
    pub replay: Obstruction<S>,
}

impl<S> FineReport<S> {
    /// Every order axiom holds and the obstruction is certified.
    pub fn confirmed(&self) -> bool {
        self.qcc1.holds
            && self.qcc2.holds
            && self.qcc7.iter().all(|c| c.holds)
            && self.conflict.is_none()
            && self.family.as_ref().is_none_or(|f| f.intersection_closed && f.empty_free)
            && self.associativity.is_some()
            && self.obstruction.holds()
            && self.replay.holds()
    }
}

/// Order axioms and the obstruction. With an anchor, only chains whose
/// conditioning sets contain it are used and every obstruction set gets
/// the anchor added.
pub fn verify_fine<S: Scalar>(
    structure: &BeliefStructure<S>,
    idx: &ValueIndex<S>,
    anchor: Option<&str>,
    seed: u64,
    search_witnesses: bool,
) -> Result<FineReport<S>, ObstructionError> {
    let anchor_index = match anchor {
        Some(a) => Some(structure.world_index(a).ok_or_else(|| ObstructionError::UnknownWorld(a.into()))?),
        None => None,
    };
    let order = InducedOrder::new(idx);
    let (qcc1, qcc2) = check_qcc1_qcc2(&order, 1000, seed);
    let obstruction = agreeing_obstruction(structure, anchor)?;
    let replay = replay_squared(structure, anchor)?;
    let table = match anchor_index {
        Some(i) => {
            let keep = anchored(i);
            PairTable::build_filtered(idx, structure.trigger(), Some(&keep))
        }
        None => PairTable::build(idx, structure.trigger()),
    };
    let family = anchor_index.map(|i| filter_family(structure.world_count(), i));
    let mut report = FineReport {
        restricted: anchor.is_some(),
        qcc1,
        qcc2,
        qcc5_vacuous: true,
        qcc7: Vec::new(),
        pair_keys: 0,
        chains: 0,
        conflict: None,
        family,
        clauses: None,
        associativity: None,
        witness_search: None,
        obstruction,
        replay,
    };
    match table {
        Err(c) => report.conflict = Some(c),
        Ok(t) => {
            report.pair_keys = t.len();
            report.chains = t.chain_count();
            let id = |o: &ObjectValue<S>| idx.find(&o.value);
            let reps: Vec<Option<u32>> = report.obstruction.classes.iter().map(|c| id(&c.members[0])).collect();
            if let (Some(x), Some(y), Some(z)) = (reps[0], reps[1], reps[2]) {
                report.associativity = check_triple(&t, x, y, z);
            }
            if search_witnesses {
                let all = find_witnesses(&t, idx.len());
                report.witness_search = Some((all.len(), all.first().copied()));
            }
            let keys = keyed(&t);
            drop(t);
            report.qcc7 = check_qcc7_on_keys(&keys, idx.len());
            report.clauses = Some(combination_clauses_on_keys(idx, &keys));
        }
    }
    Ok(report)
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
    fn probability_classes_have_the_expected_values() {
        let s = halpern_probability::<Rational>();
        let o = agreeing_obstruction(&s, None).unwrap();
        let values: Vec<Rational> = o.classes.iter().map(|c| c.members[0].value.clone()).collect();
        assert_eq!(values, vec![q(3, 5), q(5, 11), q(11, 19), q(5, 19), q(3, 11)]);
        assert!(o.classes.iter().all(|c| c.equal) && o.classes_distinct);
        // without the perturbation the two results coincide
        assert_eq!(o.lhs.value, q(3, 19));
        assert_eq!(o.rhs.value, q(3, 19));
        assert!(!o.strict_gap && !o.holds());
    }

    #[test]
    fn unknown_anchor_is_an_error() {
        let s = halpern_probability::<Rational>();
        assert_eq!(agreeing_obstruction(&s, Some("w0")).unwrap_err(), ObstructionError::UnknownWorld("w0".into()));
    }

    #[test]
    fn filter_family_is_closed() {
        let f = filter_family(5, 0);
        assert_eq!(f.members, 16);
        assert!(f.intersection_closed && f.empty_free);
    }

    #[test]
    fn order_spot_checks_and_qcc7_on_toy() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let order = InducedOrder::new(&idx);
        let (a, b) = check_qcc1_qcc2(&order, 200, 9);
        assert!(a.holds && b.holds);
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let keys = keyed(&t);
        for r in check_qcc7(&t, idx.len()) {
            assert_eq!(r.holds, crate::cox::monotone::check_clause_naive(&keys, r.clause).holds);
        }
        let c = combination_clauses(&idx, &t);
        assert_eq!(c.unit, None);
        assert_eq!(c.zero, None);
    }
}
