//! Finite conditional-belief structures.

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::event::{EventSet, MAX_WORLDS};
use crate::scalar::Scalar;

/// Which weight table a sum is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightTable {
    Base,
    Perturbed,
}

/// A conditional object `V | U` with `U ≠ ∅`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConditionalObject {
    pub event: EventSet,
    pub given: EventSet,
}

impl ConditionalObject {
    pub fn new(event: EventSet, given: EventSet) -> Result<Self, DomainError> {
        if given.is_empty() {
            return Err(DomainError::EmptyConditioning);
        }
        Ok(ConditionalObject { event, given })
    }
}

/// Worlds with a base weight table `f`, a perturbed table `f′`, and a trigger
/// set `W′`. Conditioning on any `U ⊇ W′` measures the event with `f′`; every
/// other conditioning set uses `f`. Normalization is always by `f(U)`.
///
/// Invariants (checked by [`BeliefStructure::new`]):
/// * every weight in both tables is strictly positive;
/// * the tables differ only inside the trigger set;
/// * `f(W′) = f′(W′)`, so conditioning on `U ⊇ W′` still yields `Bel(U|U) = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeliefStructure<S> {
    worlds: Vec<String>,
    base: Vec<S>,
    perturbed: Vec<S>,
    trigger: EventSet,
    delta: S,
    blocks: Vec<EventSet>,
}

impl<S: Scalar> BeliefStructure<S> {
    pub fn new(
        worlds: Vec<String>,
        base: Vec<S>,
        perturbed: Vec<S>,
        trigger: EventSet,
        delta: S,
    ) -> Result<Self, DomainError> {
        let n = worlds.len();
        if n == 0 {
            return Err(DomainError::NoWorlds);
        }
        if n > MAX_WORLDS {
            return Err(DomainError::TooManyWorlds(n));
        }
        if base.len() != n || perturbed.len() != n {
            return Err(DomainError::WeightCount { worlds: n, base: base.len(), perturbed: perturbed.len() });
        }
        for (i, name) in worlds.iter().enumerate() {
            if worlds[..i].contains(name) {
                return Err(DomainError::DuplicateWorld(name.clone()));
            }
        }
        let full = EventSet::full(n);
        if !trigger.is_subset_of(full) {
            return Err(DomainError::TriggerOutOfRange);
        }
        for i in 0..n {
            if base[i] <= S::zero() {
                return Err(DomainError::NonPositiveWeight { world: worlds[i].clone(), table: WeightTable::Base });
            }
            if perturbed[i] <= S::zero() {
                return Err(DomainError::NonPositiveWeight {
                    world: worlds[i].clone(),
                    table: WeightTable::Perturbed,
                });
            }
            if base[i] != perturbed[i] && !trigger.contains(i) {
                return Err(DomainError::PerturbationOutsideTrigger(worlds[i].clone()));
            }
        }
        let s = BeliefStructure { worlds, base, perturbed, trigger, delta, blocks: Vec::new() };
        if s.weight_sum(WeightTable::Base, trigger) != s.weight_sum(WeightTable::Perturbed, trigger) {
            return Err(DomainError::TriggerMassMismatch);
        }
        Ok(s)
    }

    /// Pure probability structure: `f′ = f`, empty trigger.
    pub fn probability(worlds: Vec<String>, weights: Vec<S>) -> Result<Self, DomainError> {
        BeliefStructure::new(worlds, weights.clone(), weights, EventSet::EMPTY, S::zero())
    }

    /// Declares a partition of the worlds into magnitude blocks.
    pub fn with_blocks(mut self, blocks: Vec<EventSet>) -> Result<Self, DomainError> {
        let mut seen = EventSet::EMPTY;
        for b in &blocks {
            if b.is_empty() || !(seen & *b).is_empty() || !b.is_subset_of(self.full()) {
                return Err(DomainError::InvalidBlocks);
            }
            seen = seen | *b;
        }
        if !blocks.is_empty() && seen != self.full() {
            return Err(DomainError::InvalidBlocks);
        }
        self.blocks = blocks;
        Ok(self)
    }

    pub fn world_count(&self) -> usize {
        self.worlds.len()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn world_index(&self, label: &str) -> Option<usize> {
        self.worlds.iter().position(|w| w == label)
    }

    /// Event from world labels; panics on an unknown label.
    pub fn event(&self, labels: &[&str]) -> EventSet {
        EventSet::from_indices(labels.iter().map(|l| {
            self.world_index(l).unwrap_or_else(|| panic!("unknown world {l:?}"))
        }))
    }

    pub fn full(&self) -> EventSet {
        EventSet::full(self.worlds.len())
    }

    pub fn base(&self) -> &[S] {
        &self.base
    }

    pub fn perturbed(&self) -> &[S] {
        &self.perturbed
    }

    pub fn trigger(&self) -> EventSet {
        self.trigger
    }

    /// Perturbation magnitude baked into `f′` (informational).
    pub fn delta(&self) -> &S {
        &self.delta
    }

    pub fn blocks(&self) -> &[EventSet] {
        &self.blocks
    }

    pub fn is_unperturbed(&self) -> bool {
        self.base == self.perturbed
    }

    /// The same weights with the perturbation and the trigger removed.
    pub fn unperturbed(&self) -> Self {
        BeliefStructure {
            worlds: self.worlds.clone(),
            base: self.base.clone(),
            perturbed: self.base.clone(),
            trigger: EventSet::EMPTY,
            delta: S::zero(),
            blocks: self.blocks.clone(),
        }
    }

    pub fn weight_sum(&self, which: WeightTable, u: EventSet) -> S {
        let table = match which {
            WeightTable::Base => &self.base,
            WeightTable::Perturbed => &self.perturbed,
        };
        u.indices().filter(|&i| i < table.len()).fold(S::zero(), |acc, i| acc + &table[i])
    }

    /// `Pr(V|U) = f(V∩U) / f(U)`.
    pub fn cond_prob(&self, v: EventSet, u: EventSet) -> Result<S, DomainError> {
        if u.is_empty() {
            return Err(DomainError::EmptyConditioning);
        }
        Ok(self.weight_sum(WeightTable::Base, v & u) / self.weight_sum(WeightTable::Base, u))
    }

    /// `Bel(V|U)`: `f′(V∩U)/f(U)` when the trigger is inside `U`, else `f(V∩U)/f(U)`.
    pub fn bel_eval(&self, v: EventSet, u: EventSet) -> Result<S, DomainError> {
        if u.is_empty() {
            return Err(DomainError::EmptyConditioning);
        }
        let table = self.table_for(u);
        Ok(self.weight_sum(table, v & u) / self.weight_sum(WeightTable::Base, u))
    }

    /// Unconditional belief `Bel(U) = Bel(U|W)`.
    pub fn bel(&self, u: EventSet) -> S {
        self.bel_eval(u, self.full()).expect("domain is nonempty")
    }

    /// The table used for numerators when conditioning on `u`.
    pub fn table_for(&self, u: EventSet) -> WeightTable {
        if self.trigger.is_subset_of(u) {
            WeightTable::Perturbed
        } else {
            WeightTable::Base
        }
    }

    /// Removes world `i`, keeping the trigger invariant intact when possible.
    pub fn without_world(&self, i: usize) -> Result<Self, DomainError> {
        let keep: Vec<usize> = (0..self.world_count()).filter(|&j| j != i).collect();
        self.restrict_to(&keep)
    }

    /// Sub-structure on the listed worlds (in the listed order).
    pub fn restrict_to(&self, keep: &[usize]) -> Result<Self, DomainError> {
        let worlds = keep.iter().map(|&j| self.worlds[j].clone()).collect();
        let base = keep.iter().map(|&j| self.base[j].clone()).collect();
        let perturbed = keep.iter().map(|&j| self.perturbed[j].clone()).collect();
        let trigger = EventSet::from_indices(
            keep.iter().enumerate().filter(|(_, &j)| self.trigger.contains(j)).map(|(k, _)| k),
        );
        BeliefStructure::new(worlds, base, perturbed, trigger, self.delta.clone())
    }

    /// Merges world `j` into world `i` (weights add; `j` disappears).
    pub fn merge_worlds(&self, i: usize, j: usize) -> Result<Self, DomainError> {
        assert_ne!(i, j);
        let mut worlds = Vec::new();
        let mut base = Vec::new();
        let mut perturbed = Vec::new();
        let mut trigger = Vec::new();
        for k in 0..self.world_count() {
            if k == j {
                continue;
            }
            let (mut b, mut p) = (self.base[k].clone(), self.perturbed[k].clone());
            let mut name = self.worlds[k].clone();
            let mut in_trigger = self.trigger.contains(k);
            if k == i {
                b = b + &self.base[j];
                p = p + &self.perturbed[j];
                name = format!("{}+{}", self.worlds[i], self.worlds[j]);
                in_trigger |= self.trigger.contains(j);
            }
            if in_trigger {
                trigger.push(worlds.len());
            }
            worlds.push(name);
            base.push(b);
            perturbed.push(p);
        }
        BeliefStructure::new(worlds, base, perturbed, EventSet::from_indices(trigger), self.delta.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn labels(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn rejects_nonpositive_weights() {
        let err = BeliefStructure::probability(labels(2), vec![q(1, 1), q(0, 1)]).unwrap_err();
        assert!(matches!(err, DomainError::NonPositiveWeight { .. }));
    }

    #[test]
    fn rejects_perturbation_outside_trigger() {
        let err = BeliefStructure::new(
            labels(3),
            vec![q(1, 1), q(1, 1), q(1, 1)],
            vec![q(1, 2), q(3, 2), q(1, 1)],
            EventSet::from_indices([0]),
            q(1, 2),
        )
        .unwrap_err();
        assert!(matches!(err, DomainError::PerturbationOutsideTrigger(ref w) if w == "w2"));
    }

    #[test]
    fn rejects_trigger_mass_change() {
        let err = BeliefStructure::new(
            labels(2),
            vec![q(1, 1), q(1, 1)],
            vec![q(1, 2), q(1, 1)],
            EventSet::from_indices([0, 1]),
            q(1, 2),
        )
        .unwrap_err();
        assert_eq!(err, DomainError::TriggerMassMismatch);
    }

    #[test]
    fn conditioning_on_empty_set_is_an_error() {
        let s = BeliefStructure::probability(labels(2), vec![q(1, 1), q(1, 1)]).unwrap();
        assert_eq!(s.cond_prob(s.full(), EventSet::EMPTY), Err(DomainError::EmptyConditioning));
        assert_eq!(s.bel_eval(s.full(), EventSet::EMPTY), Err(DomainError::EmptyConditioning));
        assert!(ConditionalObject::new(s.full(), EventSet::EMPTY).is_err());
    }

    #[test]
    fn perturbed_table_only_applies_over_the_trigger() {
        let s = BeliefStructure::new(
            labels(3),
            vec![q(1, 1), q(1, 1), q(2, 1)],
            vec![q(1, 2), q(3, 2), q(2, 1)],
            EventSet::from_indices([0, 1]),
            q(1, 2),
        )
        .unwrap();
        let w1 = EventSet::singleton(0);
        assert_eq!(s.bel_eval(w1, EventSet::from_indices([0, 1])).unwrap(), q(1, 4));
        assert_eq!(s.bel_eval(w1, EventSet::from_indices([0, 2])).unwrap(), q(1, 3));
        assert_eq!(s.cond_prob(w1, EventSet::from_indices([0, 1])).unwrap(), q(1, 2));
    }

    #[test]
    fn merge_and_remove_keep_invariants() {
        let s = BeliefStructure::new(
            labels(4),
            vec![q(1, 1), q(1, 1), q(2, 1), q(5, 1)],
            vec![q(1, 2), q(3, 2), q(2, 1), q(5, 1)],
            EventSet::from_indices([0, 1]),
            q(1, 2),
        )
        .unwrap();
        let r = s.without_world(3).unwrap();
        assert_eq!(r.world_count(), 3);
        let m = s.merge_worlds(2, 3).unwrap();
        assert_eq!(m.base()[2], q(7, 1));
        assert_eq!(m.trigger(), EventSet::from_indices([0, 1]));
        // dropping one half of the offsetting pair breaks the trigger mass balance
        assert!(s.without_world(0).is_err());
    }
}
