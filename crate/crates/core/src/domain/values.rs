//! Dense, order-preserving ids for every conditional value of a structure.
//!
//! `Bel(V|U)` depends only on `V∩U`, so the whole function is a table over
//! the `3^n` nested pairs `A ⊆ U`. Each distinct value gets a `u32` id whose
//! order matches the numeric order, so the large sweeps compare ids instead
//! of rationals.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::domain::frac::{wide_subset_sums, Frac, Gap, ScaledWeights, Wide};
use crate::domain::BeliefStructure;
use crate::error::DomainError;
use crate::event::{EventSet, TernaryIndex};
use crate::scalar::Scalar;

/// Largest domain the dense tables are built for.
pub const ENUMERATION_LIMIT: usize = 16;

/// Which conditional function a [`ValueIndex`] tabulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    /// The piecewise belief function (perturbed numerators over the trigger).
    Belief,
    /// Plain conditional probability from the base weights.
    Probability,
}

const NO_ID: u32 = u32::MAX;

#[derive(Debug)]
pub struct ValueIndex<S> {
    n: usize,
    kind: ValueKind,
    trigger: EventSet,
    tern: TernaryIndex,
    base_sums: Vec<Wide>,
    pert_sums: Vec<Wide>,
    ids: Vec<u32>,
    fracs: Vec<Frac>,
    cache: Vec<OnceLock<S>>,
}

/// Subset sums of a weight table, indexed by bitmask.
pub fn subset_sums<S: Scalar>(weights: &[S]) -> Vec<S> {
    let n = weights.len();
    let mut sums = vec![S::zero(); 1usize << n];
    for s in 1..sums.len() {
        let low = s.trailing_zeros() as usize;
        sums[s] = sums[s & (s - 1)].clone() + &weights[low];
    }
    sums
}

impl<S: Scalar> ValueIndex<S> {
    pub fn build(structure: &BeliefStructure<S>, kind: ValueKind) -> Result<Self, DomainError> {
        let n = structure.world_count();
        if n > ENUMERATION_LIMIT {
            return Err(DomainError::EnumerationTooLarge { worlds: n, limit: ENUMERATION_LIMIT });
        }
        let scaled = ScaledWeights::new(structure.base(), structure.perturbed())?;
        let mut idx = ValueIndex {
            n,
            kind,
            trigger: structure.trigger(),
            tern: TernaryIndex::new(n),
            base_sums: wide_subset_sums(&scaled.base),
            pert_sums: wide_subset_sums(&scaled.perturbed),
            ids: Vec::new(),
            fracs: Vec::new(),
            cache: Vec::new(),
        };

        // entry = (u << 16) | a for every nonempty U and A ⊆ U
        let full = EventSet::full(n);
        let mut entries: Vec<u32> = Vec::with_capacity(idx.tern.len());
        for u in full.subsets().skip(1) {
            entries.extend(u.subsets().map(|a| ((u.bits() as u32) << 16) | a.bits() as u32));
        }
        let unpack = |e: u32| (EventSet::from_bits((e & 0xffff) as u64), EventSet::from_bits((e >> 16) as u64));
        entries.par_sort_unstable_by(|&x, &y| {
            let (a, u) = unpack(x);
            let (b, v) = unpack(y);
            idx.frac_at(a, u).cmp(&idx.frac_at(b, v))
        });

        let mut ids = vec![NO_ID; idx.tern.len()];
        let mut fracs: Vec<Frac> = Vec::new();
        for e in entries {
            let (a, u) = unpack(e);
            let f = idx.frac_at(a, u);
            if fracs.last() != Some(&f) {
                fracs.push(f);
            }
            ids[idx.tern.slot(a, u)] = (fracs.len() - 1) as u32;
        }
        idx.cache = (0..fracs.len()).map(|_| OnceLock::new()).collect();
        idx.ids = ids;
        idx.fracs = fracs;
        Ok(idx)
    }

    pub fn world_count(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    /// Number of distinct values.
    pub fn len(&self) -> usize {
        self.fracs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fracs.is_empty()
    }

    /// Id of `Bel(A|U)` for `A ⊆ U`, `U ≠ ∅`.
    #[inline]
    pub fn id(&self, a: EventSet, u: EventSet) -> u32 {
        debug_assert!(!u.is_empty() && a.is_subset_of(u));
        self.ids[self.tern.slot(a, u)]
    }

    /// Id of `Bel(V|U)` for arbitrary `V`.
    #[inline]
    pub fn id_of(&self, v: EventSet, u: EventSet) -> u32 {
        self.id(v & u, u)
    }

    /// Whether numerators over `u` use the perturbed table.
    #[inline]
    pub fn perturbed_over(&self, u: EventSet) -> bool {
        self.kind == ValueKind::Belief && self.trigger.is_subset_of(u)
    }

    /// The value of `A` given `U` as an unreduced fraction with
    /// denominator `L·f(U)`.
    #[inline]
    pub fn frac_at(&self, a: EventSet, u: EventSet) -> Frac {
        let num = if self.perturbed_over(u) { &self.pert_sums } else { &self.base_sums };
        Frac::new(num[a.bits() as usize], self.base_sums[u.bits() as usize])
    }

    /// Scaled weight sum `L·f(A)` (base table).
    pub fn scaled_base(&self, a: EventSet) -> Wide {
        self.base_sums[a.bits() as usize]
    }

    /// Scaled weight sum `L·f′(A)` (perturbed table).
    pub fn scaled_perturbed(&self, a: EventSet) -> Wide {
        self.pert_sums[a.bits() as usize]
    }

    pub fn frac(&self, id: u32) -> &Frac {
        &self.fracs[id as usize]
    }

    pub fn value(&self, id: u32) -> &S {
        self.cache[id as usize].get_or_init(|| self.fracs[id as usize].to_scalar())
    }

    pub fn eval(&self, v: EventSet, u: EventSet) -> &S {
        self.value(self.id_of(v, u))
    }

    pub fn find_frac(&self, f: &Frac) -> Option<u32> {
        self.fracs.binary_search(f).ok().map(|i| i as u32)
    }

    pub fn find(&self, value: &S) -> Option<u32> {
        let r = value.to_big_rational();
        let num = Wide::try_from(r.numer()).ok()?;
        let den = Wide::try_from(r.denom()).ok()?;
        self.find_frac(&Frac::new(num, den))
    }

    /// Id of the value 0 (always present: `Bel(∅|U) = 0`).
    pub fn zero_id(&self) -> u32 {
        0
    }

    /// Id of the value 1 (always present: `Bel(U|U) = 1`).
    pub fn one_id(&self) -> u32 {
        (self.fracs.len() - 1) as u32
    }

    /// Smallest difference between consecutive distinct values.
    pub fn min_gap(&self) -> Option<S> {
        self.fracs.windows(2).map(|w| Gap::between(&w[0], &w[1])).min().map(|g| g.to_scalar())
    }

    /// Iterates `(a, u)` for all nested pairs with `u ≠ ∅`.
    pub fn nested_pairs(&self) -> impl Iterator<Item = (EventSet, EventSet)> + '_ {
        EventSet::full(self.n).subsets().skip(1).flat_map(|u| u.subsets().map(move |a| (a, u)))
    }
}
