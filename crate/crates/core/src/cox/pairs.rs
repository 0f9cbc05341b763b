//! The partial combination function read off nested chains.
//!
//! Every chain `u1 ⊇ u2 ⊇ u3` with `u2 ≠ ∅` forces the conjunction
//! combinator at the pair `(Bel(u3|u2), Bel(u2|u1))` to take the value
//! `Bel(u3|u1)`. The table collects these pairs by value id.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::domain::ValueIndex;
use crate::event::EventSet;
use crate::scalar::Scalar;

/// A chain `u1 ⊇ u2 ⊇ u3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ChainWitness {
    pub u1: EventSet,
    pub u2: EventSet,
    pub u3: EventSet,
}

impl ChainWitness {
    pub fn new(u1: EventSet, u2: EventSet, u3: EventSet) -> Self {
        debug_assert!(u3.is_subset_of(u2) && u2.is_subset_of(u1) && !u2.is_empty());
        ChainWitness { u1, u2, u3 }
    }

    /// `u1 << 32 | u2 << 16 | u3`; numeric order is lexicographic order.
    pub fn pack(&self) -> u64 {
        (self.u1.bits() << 32) | (self.u2.bits() << 16) | self.u3.bits()
    }

    pub fn unpack(p: u64) -> Self {
        ChainWitness {
            u1: EventSet::from_bits(p >> 32),
            u2: EventSet::from_bits((p >> 16) & 0xffff),
            u3: EventSet::from_bits(p & 0xffff),
        }
    }
}

const NONE: u64 = u64::MAX;

/// Stored per key: the forced value and the smallest witness of each kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairEntry {
    pub w: u32,
    /// Smallest chain whose `u1` does not contain the trigger (every chain,
    /// when the trigger is empty).
    free: u64,
    /// Smallest chain whose `u1` contains the trigger.
    triggered: u64,
}

impl PairEntry {
    pub fn free_witness(&self) -> Option<ChainWitness> {
        (self.free != NONE).then(|| ChainWitness::unpack(self.free))
    }

    pub fn triggered_witness(&self) -> Option<ChainWitness> {
        (self.triggered != NONE).then(|| ChainWitness::unpack(self.triggered))
    }

    /// Lexicographically smallest witness overall.
    pub fn witness(&self) -> ChainWitness {
        ChainWitness::unpack(self.free.min(self.triggered))
    }

    fn absorb(&mut self, other: &PairEntry) {
        self.free = self.free.min(other.free);
        self.triggered = self.triggered.min(other.triggered);
    }
}

#[inline]
pub fn pack_key(x: u32, y: u32) -> u64 {
    ((x as u64) << 32) | y as u64
}

#[inline]
pub fn unpack_key(k: u64) -> (u32, u32) {
    ((k >> 32) as u32, k as u32)
}

/// Two chains with the same `(x, y)` but different forced values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairConflict {
    pub x: u32,
    pub y: u32,
    pub w1: u32,
    pub w2: u32,
    pub first: ChainWitness,
    pub second: ChainWitness,
}

/// Keys are `(x, y)` value-id pairs of the belief index it was built from.
#[derive(Clone, Debug)]
pub struct PairTable {
    /// Split by key hash so that growing the table never doubles all of it
    /// at once.
    shards: Vec<FxHashMap<u64, PairEntry>>,
    chains: u64,
}

const SHARD_BITS: u32 = 4;

#[inline]
fn shard_of(key: u64) -> usize {
    (key.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> (64 - SHARD_BITS)) as usize
}

/// Restricts which chains contribute to a table.
pub type ChainFilter<'a> = &'a (dyn Fn(&ChainWitness) -> bool + Sync);

impl PairTable {
    /// Enumerates all chains (`4^n` minus those with `u2 = ∅`).
    pub fn build<S: Scalar>(idx: &ValueIndex<S>, trigger: EventSet) -> Result<Self, PairConflict> {
        Self::build_filtered(idx, trigger, None)
    }

    /// Like [`PairTable::build`], keeping only chains `c` with `keep(c)`.
    pub fn build_filtered<S: Scalar>(
        idx: &ValueIndex<S>,
        trigger: EventSet,
        keep: Option<ChainFilter<'_>>,
    ) -> Result<Self, PairConflict> {
        let full = EventSet::full(idx.world_count());
        let tops: Vec<EventSet> = full.subsets().skip(1).collect();
        let threads = rayon::current_num_threads();
        let chunk = (tops.len() / (threads * 8)).max(1);
        let chunks: Vec<&[EventSet]> = tops.chunks(chunk).collect();
        let mut merged: Vec<FxHashMap<u64, PairEntry>> = vec![FxHashMap::default(); 1 << SHARD_BITS];
        let mut chains = 0;
        // one batch of chunks per round keeps at most `threads` partial maps
        // alive next to the merged one
        for batch in chunks.chunks(threads) {
            let parts: Vec<Result<(FxHashMap<u64, PairEntry>, u64), PairConflict>> = batch
                .par_iter()
                .map(|us| {
                    let mut map = FxHashMap::default();
                    let mut count = 0u64;
                    for &u1 in us.iter() {
                        let trig = !trigger.is_empty() && trigger.is_subset_of(u1);
                        for u2 in u1.subsets().skip(1) {
                            let y = idx.id(u2, u1);
                            for u3 in u2.subsets() {
                                let c = ChainWitness { u1, u2, u3 };
                                if let Some(f) = keep {
                                    if !f(&c) {
                                        continue;
                                    }
                                }
                                count += 1;
                                let x = idx.id(u3, u2);
                                let w = idx.id(u3, u1);
                                insert(&mut map, x, y, w, c, trig)?;
                            }
                        }
                    }
                    Ok((map, count))
                })
                .collect();
            for part in parts {
                let (map, count) = part?;
                chains += count;
                merge_into(&mut merged, map)?;
            }
        }
        Ok(PairTable { shards: merged, chains })
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.shards.iter().all(|m| m.is_empty())
    }

    /// Number of chains enumerated.
    pub fn chain_count(&self) -> u64 {
        self.chains
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<u32> {
        self.entry(x, y).map(|e| e.w)
    }

    pub fn entry(&self, x: u32, y: u32) -> Option<&PairEntry> {
        let k = pack_key(x, y);
        self.shards[shard_of(k)].get(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, &PairEntry)> + '_ {
        self.shards.iter().flat_map(|m| m.iter()).map(|(&k, e)| {
            let (x, y) = unpack_key(k);
            (x, y, e)
        })
    }

    /// `(x, y, entry)` sorted by `(x, y)`.
    pub fn sorted(&self) -> Vec<(u32, u32, PairEntry)> {
        let mut v: Vec<_> = self.iter().map(|(x, y, e)| (x, y, *e)).collect();
        v.sort_unstable_by_key(|&(x, y, _)| (x, y));
        v
    }
}

fn merge_into(merged: &mut [FxHashMap<u64, PairEntry>], map: FxHashMap<u64, PairEntry>) -> Result<(), PairConflict> {
    for (k, e) in map {
        let merged = &mut merged[shard_of(k)];
        match merged.get_mut(&k) {
            Some(old) if old.w != e.w => {
                let (x, y) = unpack_key(k);
                return Err(PairConflict { x, y, w1: old.w, w2: e.w, first: old.witness(), second: e.witness() });
            }
            Some(old) => old.absorb(&e),
            None => {
                merged.insert(k, e);
            }
        }
    }
    Ok(())
}

fn insert(
    map: &mut FxHashMap<u64, PairEntry>,
    x: u32,
    y: u32,
    w: u32,
    c: ChainWitness,
    triggered: bool,
) -> Result<(), PairConflict> {
    let packed = c.pack();
    let e = map.entry(pack_key(x, y)).or_insert(PairEntry { w, free: NONE, triggered: NONE });
    if e.w != w {
        return Err(PairConflict { x, y, w1: e.w, w2: w, first: e.witness(), second: c });
    }
    let slot = if triggered { &mut e.triggered } else { &mut e.free };
    if packed < *slot {
        *slot = packed;
    }
    Ok(())
}

/// Keeps chains whose conditioning sets `u1 ⊇ u2` both contain `anchor`.
pub fn anchored(anchor: usize) -> impl Fn(&ChainWitness) -> bool + Sync {
    move |c: &ChainWitness| c.u2.contains(anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::constructions::small_perturbed;
    use crate::domain::ValueKind;
    use crate::Rational;

    #[test]
    fn packing_preserves_lexicographic_order() {
        let a = ChainWitness::new(EventSet::from_bits(3), EventSet::from_bits(3), EventSet::from_bits(1));
        let b = ChainWitness::new(EventSet::from_bits(3), EventSet::from_bits(2), EventSet::from_bits(2));
        let c = ChainWitness::new(EventSet::from_bits(7), EventSet::from_bits(1), EventSet::EMPTY);
        assert_eq!(a < b, a.pack() < b.pack());
        assert_eq!(b < c, b.pack() < c.pack());
        assert_eq!(ChainWitness::unpack(c.pack()), c);
    }

    #[test]
    fn every_chain_is_consistent_with_its_key() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        assert_eq!(t.chain_count(), 4u64.pow(4) - 2u64.pow(4));
        for (x, y, e) in t.iter() {
            let c = e.witness();
            assert_eq!(idx.id(c.u3, c.u2), x);
            assert_eq!(idx.id(c.u2, c.u1), y);
            assert_eq!(idx.id(c.u3, c.u1), e.w);
        }
    }

    #[test]
    fn probability_tables_are_products() {
        let s = small_perturbed().unperturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        for (x, y, e) in t.iter() {
            let p: Rational = idx.value(x).clone() * idx.value(y);
            assert_eq!(&p, idx.value(e.w));
        }
    }
}
