//! Constrained triples: values read off chains `u1 ⊇ u2 ⊇ u3 ⊇ u4` with
//! `u3 ≠ ∅`, where both association orders are forced to agree.

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::cox::pairs::PairTable;
use crate::domain::ValueIndex;
use crate::event::EventSet;
use crate::scalar::Scalar;

/// A chain of four nested sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Chain4 {
    pub u1: EventSet,
    pub u2: EventSet,
    pub u3: EventSet,
    pub u4: EventSet,
}

/// `(x, y, z) = (Bel(u4|u3), Bel(u3|u2), Bel(u2|u1))` as value ids.
pub fn triple_of<S: Scalar>(idx: &ValueIndex<S>, c: &Chain4) -> (u32, u32, u32) {
    (idx.id(c.u4, c.u3), idx.id(c.u3, c.u2), idx.id(c.u2, c.u1))
}

/// A chain whose triple has a missing lookup or disagreeing sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TripleFailure {
    pub chain: Chain4,
    pub x: u32,
    pub y: u32,
    pub z: u32,
    pub lhs: Option<u32>,
    pub rhs: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TripleSweep {
    pub chains: u64,
    pub holds: bool,
    pub failure: Option<TripleFailure>,
    /// For each queried triple, the smallest chain realizing it, if any.
    pub queries: Vec<((u32, u32, u32), Option<Chain4>)>,
}

/// Enumerates all `5^n` chains (each world sits in one of the layers
/// `W∖u1, u1∖u2, u2∖u3, u3∖u4, u4`), skipping `u3 = ∅`, and checks
/// `F(x, F(y, z)) = F(F(x, y), z)` through table lookups. Membership of the
/// query triples is recorded on the way.
pub fn sweep_constrained<S: Scalar>(
    idx: &ValueIndex<S>,
    table: &PairTable,
    queries: &[(u32, u32, u32)],
) -> TripleSweep {
    let full = EventSet::full(idx.world_count());
    let tops: Vec<EventSet> = full.subsets().skip(1).collect();
    let wanted: FxHashSet<(u32, u32, u32)> = queries.iter().copied().collect();

    struct Part {
        chains: u64,
        failure: Option<TripleFailure>,
        hits: Vec<((u32, u32, u32), Chain4)>,
    }

    let parts: Vec<Part> = tops
        .par_iter()
        .map(|&u1| {
            let mut part = Part { chains: 0, failure: None, hits: Vec::new() };
            for u2 in u1.subsets().skip(1) {
                let z = idx.id(u2, u1);
                for u3 in u2.subsets().skip(1) {
                    let y = idx.id(u3, u2);
                    let yz = table.get(y, z);
                    for u4 in u3.subsets() {
                        part.chains += 1;
                        let x = idx.id(u4, u3);
                        let lhs = yz.and_then(|a| table.get(x, a));
                        let rhs = table.get(x, y).and_then(|b| table.get(b, z));
                        let chain = Chain4 { u1, u2, u3, u4 };
                        if (lhs.is_none() || lhs != rhs) && part.failure.is_none() {
                            part.failure = Some(TripleFailure { chain, x, y, z, lhs, rhs });
                        }
                        if !wanted.is_empty() && wanted.contains(&(x, y, z)) {
                            part.hits.push(((x, y, z), chain));
                        }
                    }
                }
            }
            part
        })
        .collect();

    let chains = parts.iter().map(|p| p.chains).sum();
    let failure = parts.iter().find_map(|p| p.failure);
    let mut answers: Vec<((u32, u32, u32), Option<Chain4>)> = queries.iter().map(|&q| (q, None)).collect();
    for part in &parts {
        for (t, c) in &part.hits {
            for (q, best) in answers.iter_mut() {
                if q == t && best.is_none_or(|b| *c < b) {
                    *best = Some(*c);
                }
            }
        }
    }
    TripleSweep { chains, holds: failure.is_none(), failure, queries: answers }
}

/// Membership test for one triple without the full sweep: scans the `4^n`
/// chains realizing `(y, z)` and, for each, the subsets `u4 ⊆ u3` for `x`.
/// Returns the smallest realizing chain.
pub fn is_constrained_triple<S: Scalar>(idx: &ValueIndex<S>, x: u32, y: u32, z: u32) -> Option<Chain4> {
    let full = EventSet::full(idx.world_count());
    let tops: Vec<EventSet> = full.subsets().skip(1).collect();
    tops.par_iter()
        .filter_map(|&u1| {
            for u2 in u1.subsets().skip(1) {
                if idx.id(u2, u1) != z {
                    continue;
                }
                for u3 in u2.subsets().skip(1) {
                    if idx.id(u3, u2) != y {
                        continue;
                    }
                    if let Some(u4) = u3.subsets().find(|&u4| idx.id(u4, u3) == x) {
                        return Some(Chain4 { u1, u2, u3, u4 });
                    }
                }
            }
            None
        })
        .min()
}

/// Distinct constrained triples with their smallest chain, sorted by
/// `(x, y, z)`.
pub fn enumerate_constrained<S: Scalar>(idx: &ValueIndex<S>) -> Vec<((u32, u32, u32), Chain4)> {
    let full = EventSet::full(idx.world_count());
    let tops: Vec<EventSet> = full.subsets().skip(1).collect();
    let parts: Vec<FxHashMap<(u32, u32, u32), Chain4>> = tops
        .par_iter()
        .map(|&u1| {
            let mut m: FxHashMap<(u32, u32, u32), Chain4> = FxHashMap::default();
            for u2 in u1.subsets().skip(1) {
                for u3 in u2.subsets().skip(1) {
                    for u4 in u3.subsets() {
                        let c = Chain4 { u1, u2, u3, u4 };
                        m.entry(triple_of(idx, &c)).and_modify(|o| *o = (*o).min(c)).or_insert(c);
                    }
                }
            }
            m
        })
        .collect();
    let mut merged: FxHashMap<(u32, u32, u32), Chain4> = FxHashMap::default();
    for part in parts {
        for (t, c) in part {
            merged.entry(t).and_modify(|o| *o = (*o).min(c)).or_insert(c);
        }
    }
    let mut out: Vec<_> = merged.into_iter().collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}
