//! Events as fixed-width bitmasks over world indices.

use std::fmt;
use std::ops::{BitAnd, BitOr, Sub};

use serde::{Deserialize, Serialize};

/// Largest domain an [`EventSet`] can describe.
pub const MAX_WORLDS: usize = 64;

/// A subset of the worlds `0..n`, `n <= 64`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSet(u64);

impl EventSet {
    pub const EMPTY: EventSet = EventSet(0);

    pub const fn from_bits(bits: u64) -> Self {
        EventSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// The whole domain of `n` worlds.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_WORLDS, "at most {MAX_WORLDS} worlds");
        if n == MAX_WORLDS {
            EventSet(u64::MAX)
        } else {
            EventSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_WORLDS);
        EventSet(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(EventSet::EMPTY, |acc, i| acc | EventSet::singleton(i))
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, i: usize) -> bool {
        i < MAX_WORLDS && (self.0 >> i) & 1 == 1
    }

    pub const fn is_subset_of(self, other: EventSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn intersect(self, other: EventSet) -> EventSet {
        EventSet(self.0 & other.0)
    }

    pub const fn union(self, other: EventSet) -> EventSet {
        EventSet(self.0 | other.0)
    }

    pub const fn difference(self, other: EventSet) -> EventSet {
        EventSet(self.0 & !other.0)
    }

    /// Complement relative to the domain `0..n`.
    pub fn complement(self, n: usize) -> EventSet {
        EventSet::full(n).difference(self)
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    /// All subsets of `self`, in increasing numeric order, starting with the
    /// empty set and ending with `self`.
    pub fn subsets(self) -> Subsets {
        Subsets { mask: self.0, next: Some(0) }
    }

    /// All sets `T` with `self ⊆ T ⊆ within`.
    pub fn supersets_within(self, within: EventSet) -> impl Iterator<Item = EventSet> {
        let base = self;
        within.difference(self).subsets().map(move |extra| base | extra)
    }
}

impl BitAnd for EventSet {
    type Output = EventSet;
    fn bitand(self, rhs: EventSet) -> EventSet {
        self.intersect(rhs)
    }
}

impl BitOr for EventSet {
    type Output = EventSet;
    fn bitor(self, rhs: EventSet) -> EventSet {
        self.union(rhs)
    }
}

impl Sub for EventSet {
    type Output = EventSet;
    fn sub(self, rhs: EventSet) -> EventSet {
        self.difference(rhs)
    }
}

impl fmt::Debug for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.indices()).finish()
    }
}

impl fmt::LowerHex for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerHex::fmt(&self.0, f)
    }
}

/// Iterator over the subsets of a mask (see [`EventSet::subsets`]).
#[derive(Clone, Debug)]
pub struct Subsets {
    mask: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = EventSet;

    fn next(&mut self) -> Option<EventSet> {
        let cur = self.next?;
        let following = cur.wrapping_sub(self.mask) & self.mask;
        self.next = if following == 0 { None } else { Some(following) };
        Some(EventSet(cur))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match self.next {
            None => (0, Some(0)),
            Some(_) => (1, None),
        }
    }
}

/// Base-3 position of a nested pair `(a, u)` with `a ⊆ u`: world `i`
/// contributes digit `[i ∈ u] + [i ∈ a]`. Used to address tables indexed by
/// all `3^n` nested pairs.
#[derive(Clone, Debug)]
pub struct TernaryIndex {
    weights: Vec<u32>,
}

impl TernaryIndex {
    /// Panics if `3^n` does not fit in `u32` (n > 20).
    pub fn new(n: usize) -> Self {
        assert!(n <= 20, "ternary index supports at most 20 worlds");
        let mut weights = vec![0u32; 1usize << n];
        let mut pow = 1u32;
        for i in 0..n {
            let bit = 1usize << i;
            for s in 0..bit {
                weights[s | bit] = weights[s] + pow;
            }
            pow *= 3;
        }
        TernaryIndex { weights }
    }

    pub fn len(&self) -> usize {
        // 3^n, where 2^n = weights.len()
        let n = self.weights.len().trailing_zeros();
        3usize.pow(n)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn slot(&self, a: EventSet, u: EventSet) -> usize {
        debug_assert!(a.is_subset_of(u));
        (self.weights[u.bits() as usize] + self.weights[a.bits() as usize]) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subsets_enumerate_in_increasing_order() {
        let m = EventSet::from_indices([0, 2, 3]);
        let subs: Vec<u64> = m.subsets().map(|s| s.bits()).collect();
        assert_eq!(subs, vec![0, 1, 4, 5, 8, 9, 12, 13]);
        assert_eq!(EventSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn supersets_within_count() {
        let full = EventSet::full(5);
        let s = EventSet::from_indices([1, 3]);
        let sups: Vec<EventSet> = s.supersets_within(full).collect();
        assert_eq!(sups.len(), 8);
        assert!(sups.iter().all(|t| s.is_subset_of(*t) && t.is_subset_of(full)));
    }

    #[test]
    fn complement_stays_in_domain() {
        let s = EventSet::from_indices([0, 1]);
        assert_eq!(s.complement(4), EventSet::from_indices([2, 3]));
        assert_eq!(EventSet::full(64).complement(64), EventSet::EMPTY);
    }

    #[test]
    fn ternary_slots_are_a_bijection() {
        let n = 5;
        let idx = TernaryIndex::new(n);
        let mut seen = vec![false; idx.len()];
        for u in EventSet::full(n).subsets() {
            for a in u.subsets() {
                let s = idx.slot(a, u);
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    proptest! {
        #[test]
        fn set_algebra_matches_bit_algebra(a in any::<u64>(), b in any::<u64>()) {
            let (x, y) = (EventSet::from_bits(a), EventSet::from_bits(b));
            prop_assert_eq!((x & y).bits(), a & b);
            prop_assert_eq!((x | y).bits(), a | b);
            prop_assert_eq!((x - y).bits(), a & !b);
            prop_assert_eq!(x.is_subset_of(y), a & !b == 0);
            prop_assert_eq!(x.len(), a.count_ones() as usize);
            prop_assert_eq!(x.indices().count(), x.len());
        }
    }
}
