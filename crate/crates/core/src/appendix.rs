//! The case analysis behind the remaining equal-probability case of the
//! twelve-world associativity argument, checked exhaustively.
//!
//! A set is standard when it lies inside one magnitude block, and a number
//! is relevant when it is `Pr(V|U)` for a standard `U`. Chains are normalized
//! to `(U₁, A, B)` with `A = U₂∩U₁ ≠ ∅` and `B = U₃∩A`; a chain is good when
//! `Bel(B|U₁) = Bel(B|A)·Bel(A|U₁)`.
//!
//! The trichotomy pairs every non-good chain with every chain sharing its
//! two probabilities. Chains are grouped by that exact pair of values, and a
//! non-good chain enters its group only as a profile `(f(U₁), f(A), B = ∅,
//! B = A)`, which is all the three alternatives look at.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use ruint::Uint;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::domain::frac::{product_equals, Frac, Gap, Wide};
use crate::domain::{BeliefStructure, ValueIndex, ValueKind, WeightTable};
use crate::error::DomainError;
use crate::event::EventSet;
use crate::scalar::{exact, Scalar};

/// Decimal exponent of each block's weights, lightest block first.
pub const BLOCK_EXPONENTS: [i32; 4] = [0, 4, 8, 18];
/// `f(U₁) ≈ 19·10^k` when `U₁` covers the heaviest block it meets.
pub const BLOCK_MANTISSA: i64 = 19;
/// Leading coefficients of `f(A)` for the non-good shapes of `A`.
pub const NON_GOOD_LEADS: [i64; 4] = [2, 3, 16, 17];

pub fn is_standard(blocks: &[EventSet], u: EventSet) -> bool {
    blocks.iter().any(|b| u.is_subset_of(*b))
}

fn require_blocks<S: Scalar>(s: &BeliefStructure<S>) -> Result<&[EventSet], DomainError> {
    if s.blocks().is_empty() {
        return Err(DomainError::InvalidBlocks);
    }
    Ok(s.blocks())
}

fn scaled_sums<S: Scalar>(s: &BeliefStructure<S>) -> Result<Vec<Wide>, DomainError> {
    let w = crate::domain::frac::ScaledWeights::new(s.base(), s.perturbed())?;
    Ok(crate::domain::frac::wide_subset_sums(&w.base))
}

/// Distinct `Pr(V|U)` over nonempty standard `U`, ascending.
pub fn relevant_fracs<S: Scalar>(s: &BeliefStructure<S>) -> Result<Vec<Frac>, DomainError> {
    let blocks = require_blocks(s)?;
    let sums = scaled_sums(s)?;
    let mut out: Vec<Frac> = Vec::new();
    for b in blocks {
        for u in b.subsets().skip(1) {
            for v in u.subsets() {
                out.push(Frac::new(sums[v.bits() as usize], sums[u.bits() as usize]));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn relevant_numbers<S: Scalar>(s: &BeliefStructure<S>) -> Result<Vec<S>, DomainError> {
    Ok(relevant_fracs(s)?.iter().map(|f| f.to_scalar()).collect())
}

/// The heaviest standard subset `U ∩ block` of `u`; the flag is set when an
/// earlier block ties with it (the later block wins).
pub fn heaviest_standard_subset(blocks: &[EventSet], sums: &[Wide], u: EventSet) -> (EventSet, bool) {
    let mut best = EventSet::EMPTY;
    let mut tie = false;
    for b in blocks {
        let part = u & *b;
        if part.is_empty() {
            continue;
        }
        let (w, top) = (sums[part.bits() as usize], sums[best.bits() as usize]);
        if best.is_empty() || w > top {
            best = part;
            tie = false;
        } else if w == top {
            best = part;
            tie = true;
        }
    }
    (best, tie)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct Closeness<S> {
    pub nonstandard: u64,
    /// `(U, V)` pairs covered, `V` ranging over all events.
    pub pairs: u64,
    #[serde(serialize_with = "exact::one")]
    pub bound: S,
    pub holds: bool,
    #[serde(serialize_with = "exact::one")]
    pub worst: S,
    /// `(U, V∩U, U′)` attaining the worst deviation.
    pub worst_case: (EventSet, EventSet, EventSet),
    pub ties: u64,
    pub first_failure: Option<(EventSet, EventSet)>,
}

type Wider = Uint<576, 9>;

fn to_big(p: &Uint<512, 8>) -> BigUint {
    BigUint::from(*p)
}

/// `|Pr(V|U) − Pr(V|U′)| < 2/1000` for every nonstandard `U ≠ ∅`.
pub fn check_closeness<S: Scalar>(s: &BeliefStructure<S>) -> Result<Closeness<S>, DomainError> {
    let blocks = require_blocks(s)?.to_vec();
    let sums = scaled_sums(s)?;
    let n = s.world_count();
    let tops: Vec<EventSet> = EventSet::full(n).subsets().skip(1).filter(|&u| !is_standard(&blocks, u)).collect();
    let five_hundred = Uint::<64, 1>::from(500u64);

    struct Part {
        u: EventSet,
        v: EventSet,
        u2: EventSet,
        num: Uint<512, 8>,
        den: Uint<512, 8>,
        tie: bool,
        failure: Option<EventSet>,
    }
    let parts: Vec<Part> = tops
        .par_iter()
        .map(|&u| {
            let (u2, tie) = heaviest_standard_subset(&blocks, &sums, u);
            let (d1, d2) = (sums[u.bits() as usize], sums[u2.bits() as usize]);
            let den: Uint<512, 8> = d1.widening_mul(d2);
            let limit: Wider = den.widening_mul(Uint::<64, 1>::ONE);
            let mut worst = (Uint::<512, 8>::ZERO, EventSet::EMPTY);
            let mut failure = None;
            for v in u.subsets() {
                let a: Uint<512, 8> = sums[v.bits() as usize].widening_mul(d2);
                let b: Uint<512, 8> = sums[(v & u2).bits() as usize].widening_mul(d1);
                let dev = if a >= b { a - b } else { b - a };
                if dev > worst.0 {
                    worst = (dev, v);
                }
                let scaled: Wider = dev.widening_mul(five_hundred);
                if failure.is_none() && scaled >= limit {
                    failure = Some(v);
                }
            }
            Part { u, v: worst.1, u2, num: worst.0, den, tie, failure }
        })
        .collect();

    let mut worst: Option<&Part> = None;
    for p in &parts {
        let better = match worst {
            None => true,
            Some(w) => to_big(&p.num) * to_big(&w.den) > to_big(&w.num) * to_big(&p.den),
        };
        if better {
            worst = Some(p);
        }
    }
    let ratio = |num: &Uint<512, 8>, den: &Uint<512, 8>| {
        S::from_big_ratio(BigInt::from(to_big(num)), BigInt::from(to_big(den))).expect("deviation fits the scalar")
    };
    let first_failure = parts.iter().find_map(|p| p.failure.map(|v| (p.u, v)));
    let (worst_value, worst_case) = match worst {
        Some(p) => (ratio(&p.num, &p.den), (p.u, p.v, p.u2)),
        None => (S::zero(), (EventSet::EMPTY, EventSet::EMPTY, EventSet::EMPTY)),
    };
    Ok(Closeness {
        nonstandard: tops.len() as u64,
        pairs: tops.len() as u64 * (1u64 << n),
        bound: S::from_int(2) / S::from_int(1000),
        holds: first_failure.is_none(),
        worst: worst_value,
        worst_case,
        ties: parts.iter().filter(|p| p.tie).count() as u64,
        first_failure,
    })
}

/// Whether every distinct conditional probability lies within `2/1000` of a
/// relevant number; returns the farthest value and its distance.
pub fn relevant_cover<S: Scalar>(pr: &ValueIndex<S>, relevant: &[Frac]) -> (bool, S, S) {
    let bound = Gap::between(&Frac::ZERO, &Frac::new(Wide::from(2u64), Wide::from(1000u64)));
    let mut j = 0usize;
    let mut far: Option<(Gap, u32)> = None;
    for id in 0..pr.len() as u32 {
        let x = pr.frac(id);
        while j + 1 < relevant.len() && relevant[j + 1] <= *x {
            j += 1;
        }
        let below = (relevant[j] <= *x).then(|| Gap::between(&relevant[j], x));
        let above_at = if relevant[j] <= *x { j + 1 } else { j };
        let above = relevant.get(above_at).map(|r| Gap::between(x, r));
        let d = match (below, above) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("relevant numbers include 0 and 1"),
        };
        if far.is_none_or(|(g, _)| d > g) {
            far = Some((d, id));
        }
    }
    let (gap, id) = far.expect("at least one value");
    (gap < bound, pr.value(id).clone(), gap.to_scalar())
}

/// A normalized chain `U₁ ⊇ A ⊇ B`, `A ≠ ∅`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Chain {
    pub u1: EventSet,
    pub a: EventSet,
    pub b: EventSet,
}

impl Chain {
    pub fn normalize(u1: EventSet, u2: EventSet, u3: EventSet) -> Option<Chain> {
        let a = u2 & u1;
        (!u1.is_empty() && !a.is_empty()).then_some(Chain { u1, a, b: u3 & a })
    }
}

/// Goodness of `(U, V, V′)`; `None` when `V∩U = ∅`.
pub fn classify_good<S: Scalar>(bel: &ValueIndex<S>, u: EventSet, v: EventSet, v2: EventSet) -> Option<bool> {
    Chain::normalize(u, v, v2).map(|c| chain_good(bel, &c))
}

fn chain_good<S: Scalar>(bel: &ValueIndex<S>, c: &Chain) -> bool {
    product_equals(&bel.frac_at(c.b, c.a), &bel.frac_at(c.a, c.u1), &bel.frac_at(c.b, c.u1))
}

/// Subsets `T` of the trigger with `f(T) ≠ f′(T)`: the shapes `A ∩ W′` a
/// non-good chain is supposed to have.
pub fn unstable_shapes<S: Scalar>(bel: &ValueIndex<S>, trigger: EventSet) -> Vec<EventSet> {
    trigger.subsets().filter(|&t| bel.scaled_base(t) != bel.scaled_perturbed(t)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeCount {
    pub shape: EventSet,
    pub chains: u64,
    pub expected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NotGood {
    pub chains: u64,
    pub non_good: u64,
    pub expected_shapes: Vec<EventSet>,
    /// Non-good chains by `A ∩ W′`.
    pub census: Vec<ShapeCount>,
    /// Non-good chains whose top set misses part of the trigger.
    pub outside_trigger: u64,
    pub holds: bool,
    /// Smallest non-good chain outside the characterization.
    pub violation: Option<Chain>,
}

#[derive(Clone, Copy, Debug)]
struct Profile {
    fu1: Wide,
    fa: Wide,
    zero: bool,
    full: bool,
    rep: Chain,
}

fn chain_flags<S: Scalar>(bel: &ValueIndex<S>, c: &Chain) -> (bool, bool) {
    let zero = bel.frac_at(c.b, c.u1).is_zero() && bel.frac_at(c.b, c.a).is_zero();
    (zero, c.b == c.a)
}

fn pr_key<S: Scalar>(pr: &ValueIndex<S>, c: &Chain) -> u64 {
    (u64::from(pr.id(c.b, c.a)) << 32) | u64::from(pr.id(c.a, c.u1))
}

/// Runs `f` on every chain, in parallel across `U₁`.
fn par_chains<T: Send>(n: usize, init: impl Fn() -> T + Sync + Send, f: impl Fn(&mut T, Chain) + Sync + Send) -> Vec<T> {
    let tops: Vec<EventSet> = EventSet::full(n).subsets().skip(1).collect();
    tops.par_iter()
        .map(|&u1| {
            let mut acc = init();
            for a in u1.subsets().skip(1) {
                for b in a.subsets() {
                    f(&mut acc, Chain { u1, a, b });
                }
            }
            acc
        })
        .collect()
}

type ProfileKey = (u64, Wide, Wide, bool, bool);

#[derive(Default)]
struct FirstPass {
    chains: u64,
    census: BTreeMap<EventSet, u64>,
    outside: u64,
    violation: Option<Chain>,
    profiles: FxHashMap<ProfileKey, Chain>,
}

fn first_pass<S: Scalar>(bel: &ValueIndex<S>, pr: Option<&ValueIndex<S>>, trigger: EventSet) -> (NotGood, FirstPass) {
    let expected = unstable_shapes(bel, trigger);
    let parts = par_chains(bel.world_count(), FirstPass::default, |acc, c| {
        acc.chains += 1;
        if chain_good(bel, &c) {
            return;
        }
        let shape = c.a & trigger;
        *acc.census.entry(shape).or_default() += 1;
        let inside = trigger.is_subset_of(c.u1);
        if !inside {
            acc.outside += 1;
        }
        if (!inside || !expected.contains(&shape)) && acc.violation.is_none_or(|v| c < v) {
            acc.violation = Some(c);
        }
        if let Some(pr) = pr {
            let (zero, full) = chain_flags(bel, &c);
            let key = (pr_key(pr, &c), bel.scaled_base(c.u1), bel.scaled_base(c.a), zero, full);
            acc.profiles.entry(key).and_modify(|r| *r = (*r).min(c)).or_insert(c);
        }
    });
    let mut all = FirstPass::default();
    for p in parts {
        all.chains += p.chains;
        all.outside += p.outside;
        for (k, v) in p.census {
            *all.census.entry(k).or_default() += v;
        }
        if let Some(v) = p.violation {
            if all.violation.is_none_or(|w| v < w) {
                all.violation = Some(v);
            }
        }
        for (k, c) in p.profiles {
            all.profiles.entry(k).and_modify(|r| *r = (*r).min(c)).or_insert(c);
        }
    }
    let census = all
        .census
        .iter()
        .map(|(&shape, &chains)| ShapeCount { shape, chains, expected: expected.contains(&shape) })
        .collect();
    let report = NotGood {
        chains: all.chains,
        non_good: all.census.values().sum(),
        expected_shapes: expected,
        census,
        outside_trigger: all.outside,
        holds: all.violation.is_none(),
        violation: all.violation,
    };
    (report, all)
}

/// Every non-good chain has `U₁ ⊇ W′` and `A ∩ W′` among the unstable shapes.
pub fn characterize_not_good<S: Scalar>(bel: &ValueIndex<S>, trigger: EventSet) -> NotGood {
    first_pass(bel, None, trigger).0
}

/// A non-good chain and another chain with the same two probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Match {
    pub non_good: Chain,
    pub other: Chain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trichotomy {
    pub chains: u64,
    pub non_good: u64,
    /// Value pairs `(Pr(B|A), Pr(A|U₁))` realized by some non-good chain.
    pub groups: u64,
    /// Distinct non-good profiles.
    pub profiles: u64,
    /// `(profile, chain)` combinations checked.
    pub pairs: u64,
    pub holds: bool,
    pub violation: Option<Match>,
    /// One representative per non-good profile and `(f(V₁), f(V₁∩V₂))`.
    #[serde(skip)]
    pub matches: Vec<Match>,
}

/// Which alternative, if any, covers a pair.
fn alternative(p: &Profile, zero: bool, full: bool, fu1: &Wide, fa: &Wide) -> bool {
    (p.zero && zero) || (p.full && full) || (p.fu1 == *fu1 && p.fa == *fa)
}

fn trichotomy_from<S: Scalar>(bel: &ValueIndex<S>, pr: &ValueIndex<S>, first: FirstPass, non_good: u64) -> Trichotomy {
    let mut groups: FxHashMap<u64, Vec<Profile>> = FxHashMap::default();
    let profile_count = first.profiles.len() as u64;
    for ((key, fu1, fa, zero, full), rep) in first.profiles {
        groups.entry(key).or_default().push(Profile { fu1, fa, zero, full, rep });
    }
    for g in groups.values_mut() {
        g.sort_unstable_by_key(|p| p.rep);
    }

    #[derive(Default)]
    struct Acc {
        pairs: u64,
        violation: Option<Match>,
        matched: FxHashMap<(Chain, Wide, Wide), Chain>,
    }
    let parts = par_chains(bel.world_count(), Acc::default, |acc, c| {
        let Some(group) = groups.get(&pr_key(pr, &c)) else { return };
        let (zero, full) = chain_flags(bel, &c);
        let (fu1, fa) = (bel.scaled_base(c.u1), bel.scaled_base(c.a));
        for p in group {
            acc.pairs += 1;
            let m = Match { non_good: p.rep, other: c };
            if !alternative(p, zero, full, &fu1, &fa) && acc.violation.is_none_or(|v| m < v) {
                acc.violation = Some(m);
            }
            acc.matched.entry((p.rep, fu1, fa)).and_modify(|o| *o = (*o).min(c)).or_insert(c);
        }
    });
    let mut pairs = 0;
    let mut violation: Option<Match> = None;
    let mut matched: FxHashMap<(Chain, Wide, Wide), Chain> = FxHashMap::default();
    for p in parts {
        pairs += p.pairs;
        if let Some(v) = p.violation {
            if violation.is_none_or(|w| v < w) {
                violation = Some(v);
            }
        }
        for (k, c) in p.matched {
            matched.entry(k).and_modify(|o| *o = (*o).min(c)).or_insert(c);
        }
    }
    let mut matches: Vec<Match> = matched.into_iter().map(|((p, _, _), other)| Match { non_good: p, other }).collect();
    matches.sort_unstable();
    Trichotomy {
        chains: first.chains,
        non_good,
        groups: groups.len() as u64,
        profiles: profile_count,
        pairs,
        holds: violation.is_none(),
        violation,
        matches,
    }
}

/// Not-good characterization and trichotomy from one scan of the chains.
pub fn verify_trichotomy<S: Scalar>(bel: &ValueIndex<S>, pr: &ValueIndex<S>, trigger: EventSet) -> (NotGood, Trichotomy) {
    let (report, first) = first_pass(bel, Some(pr), trigger);
    let t = trichotomy_from(bel, pr, first, report.non_good);
    (report, t)
}

/// Oracle: every pair of chains with equal probabilities and at least one
/// non-good member, compared directly. Quadratic in the chain count.
pub fn trichotomy_naive<S: Scalar>(bel: &ValueIndex<S>, pr: &ValueIndex<S>) -> bool {
    let chains: Vec<Chain> = par_chains(bel.world_count(), Vec::new, |v, c| v.push(c)).concat();
    let info: Vec<(u64, bool, bool, bool, Wide, Wide)> = chains
        .iter()
        .map(|c| {
            let (zero, full) = chain_flags(bel, c);
            (pr_key(pr, c), chain_good(bel, c), zero, full, bel.scaled_base(c.u1), bel.scaled_base(c.a))
        })
        .collect();
    info.par_iter().all(|p| {
        p.1 || info.iter().all(|q| {
            p.0 != q.0 || (p.2 && q.2) || (p.3 && q.3) || (p.4 == q.4 && p.5 == q.5)
        })
    })
}

/// The decomposition of a matched pair: `f(A) = a·10^18 + b`,
/// `f(U₁) = 19·10^18 + c`, `f(V₁∩V₂) = a·10^k + b′`, `f(V₁) = 19·10^k + c′`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ChainProfile<S> {
    pub a: i64,
    #[serde(serialize_with = "exact::one")]
    pub b: S,
    #[serde(serialize_with = "exact::one")]
    pub c: S,
    pub k: i32,
    #[serde(serialize_with = "exact::one")]
    pub b2: S,
    #[serde(serialize_with = "exact::one")]
    pub c2: S,
    /// `U₁ ⊇ W′` (the non-good chain covers the trigger).
    pub all_in: bool,
    /// `B = ∅` for both chains.
    pub empty_intersection: bool,
}

fn floor_div<S: Scalar>(x: &S, unit: &S) -> BigInt {
    (x.clone() / unit).to_big_rational().floor().to_integer()
}

/// Decomposes a matched pair; `k` is the exponent of the heaviest block
/// meeting `V₁`.
pub fn profile_decompose<S: Scalar>(s: &BeliefStructure<S>, m: &Match) -> Result<ChainProfile<S>, DomainError> {
    let blocks = require_blocks(s)?;
    let f = |e: EventSet| s.weight_sum(WeightTable::Base, e);
    let p10 = |e: i32| S::pow10(e).expect("powers of ten fit");
    let top = *BLOCK_EXPONENTS.last().expect("nonempty");
    let (u, v) = (&m.non_good, &m.other);
    let a = floor_div(&f(u.a), &p10(top)).to_i64().unwrap_or(i64::MAX);
    let lead = S::from_int(a);
    let nineteen = S::from_int(BLOCK_MANTISSA);
    let b = f(u.a) - lead.clone() * p10(top);
    let c = f(u.u1) - nineteen.clone() * p10(top);
    let heaviest = blocks.iter().rposition(|blk| !(*blk & v.u1).is_empty()).expect("V₁ is nonempty");
    let k = BLOCK_EXPONENTS.get(heaviest).copied().unwrap_or(top);
    let b2 = f(v.a) - lead * p10(k);
    let c2 = f(v.u1) - nineteen * p10(k);
    Ok(ChainProfile {
        a,
        b,
        c,
        k,
        b2,
        c2,
        all_in: s.trigger().is_subset_of(u.u1),
        empty_intersection: u.b.is_empty() && v.b.is_empty(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityCheck {
    /// `a ∈ {2,3,16,17}`, `0 ≤ b, c < 20·10^8`, `k ∈ {8, 18}` and `b′, c′`
    /// within `20·10^8` (`k = 18`) or `20·10^4` (`k = 8`).
    pub in_range: bool,
    pub master: bool,
    /// The split into separate equations for this `k`.
    pub split: bool,
    /// For `k = 8`: `b′ = c′ = 0`.
    pub k8_zero: bool,
}

pub fn verify_identities<S: Scalar>(p: &ChainProfile<S>) -> IdentityCheck {
    let p10 = |e: i32| S::pow10(e).expect("powers of ten fit");
    let int = S::from_int;
    let below = |x: &S, e: i32| *x >= S::zero() && *x < int(20) * p10(e);
    let a = int(p.a);
    let nineteen = int(BLOCK_MANTISSA);
    let t1 = a.clone() * &p.c2 - nineteen.clone() * &p.b2;
    let t2 = nineteen.clone() * &p.b - a.clone() * &p.c;
    let t3 = p.b.clone() * &p.c2 - p.b2.clone() * &p.c;
    let master = (p10(18) * &t1 + p10(p.k) * &t2 + t3.clone()).is_zero();
    let split = match p.k {
        8 => t1.is_zero() && t2.is_zero() && t3.is_zero(),
        18 => (nineteen * (p.b.clone() - &p.b2) + a * (p.c2.clone() - &p.c)).is_zero() && t3.is_zero(),
        _ => false,
    };
    let primed = match p.k {
        18 => below(&p.b2, 8) && below(&p.c2, 8),
        8 => below(&p.b2, 4) && below(&p.c2, 4),
        _ => false,
    };
    let in_range = NON_GOOD_LEADS.contains(&p.a) && below(&p.b, 8) && below(&p.c, 8) && primed;
    IdentityCheck { in_range, master, split, k8_zero: p.k != 8 || (p.b2.is_zero() && p.c2.is_zero()) }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Identities {
    pub pairs: u64,
    pub k8: u64,
    pub k18: u64,
    pub master: bool,
    pub split: bool,
    pub in_range: bool,
    pub range_failures: u64,
    pub k8_zero: bool,
    /// Leading coefficients seen, with pair counts.
    pub leads: Vec<(i64, u64)>,
    pub first_master_failure: Option<Match>,
    pub first_split_failure: Option<Match>,
    pub first_range_failure: Option<Match>,
}

impl Identities {
    pub fn holds(&self) -> bool {
        self.master && self.split && self.in_range && self.k8_zero
    }
}

/// The same checks on integer numerators: every weight sum is scaled by the
/// common denominator `L`, so `b = B/L` and the identities are multiplied
/// through by `L²`.
struct ScaledCheck {
    sums: Vec<Wide>,
    scale: BigInt,
    blocks: Vec<EventSet>,
}

impl ScaledCheck {
    fn new<S: Scalar>(s: &BeliefStructure<S>) -> Result<Self, DomainError> {
        let blocks = require_blocks(s)?.to_vec();
        let w = crate::domain::frac::ScaledWeights::new(s.base(), s.perturbed())?;
        let sums = crate::domain::frac::wide_subset_sums(&w.base);
        Ok(ScaledCheck { sums, scale: BigInt::from(w.scale), blocks })
    }

    fn f(&self, e: EventSet) -> BigInt {
        BigInt::from(BigUint::from(self.sums[e.bits() as usize]))
    }

    fn check(&self, m: &Match) -> (i32, i64, IdentityCheck) {
        let ten = |e: i32| num_traits::pow(BigInt::from(10), e as usize);
        let top = *BLOCK_EXPONENTS.last().expect("nonempty");
        let l = &self.scale;
        let (u, v) = (&m.non_good, &m.other);
        let p18 = ten(top) * l;
        let fa = self.f(u.a);
        let a_big = num_integer::Integer::div_floor(&fa, &p18);
        let a = a_big.to_i64().unwrap_or(i64::MAX);
        let nineteen = BigInt::from(BLOCK_MANTISSA);
        let b = fa - &a_big * &p18;
        let c = self.f(u.u1) - &nineteen * &p18;
        let heaviest = self.blocks.iter().rposition(|blk| !(*blk & v.u1).is_empty()).expect("V₁ is nonempty");
        let k = BLOCK_EXPONENTS.get(heaviest).copied().unwrap_or(top);
        let pk = ten(k) * l;
        let b2 = self.f(v.a) - &a_big * &pk;
        let c2 = self.f(v.u1) - &nineteen * &pk;
        let zero = BigInt::zero();
        let below = |x: &BigInt, e: i32| *x >= zero && *x < BigInt::from(20) * ten(e) * l;
        let t1 = &a_big * &c2 - &nineteen * &b2;
        let t2 = &nineteen * &b - &a_big * &c;
        let t3 = &b * &c2 - &b2 * &c;
        let master = (ten(top) * l * &t1 + ten(k) * l * &t2 + &t3).is_zero();
        let split = match k {
            8 => t1.is_zero() && t2.is_zero() && t3.is_zero(),
            18 => (&nineteen * (&b - &b2) + &a_big * (&c2 - &c)).is_zero() && t3.is_zero(),
            _ => false,
        };
        let primed = match k {
            18 => below(&b2, 8) && below(&c2, 8),
            8 => below(&b2, 4) && below(&c2, 4),
            _ => false,
        };
        let in_range = NON_GOOD_LEADS.contains(&a) && below(&b, 8) && below(&c, 8) && primed;
        let k8_zero = k != 8 || (b2.is_zero() && c2.is_zero());
        (k, a, IdentityCheck { in_range, master, split, k8_zero })
    }
}

pub fn check_identities<S: Scalar>(s: &BeliefStructure<S>, matches: &[Match]) -> Result<Identities, DomainError> {
    let scaled = ScaledCheck::new(s)?;
    let checked: Vec<(Match, i32, i64, IdentityCheck)> = matches
        .par_iter()
        .map(|m| {
            let (k, a, c) = scaled.check(m);
            (*m, k, a, c)
        })
        .collect();
    let first = |pred: &dyn Fn(&IdentityCheck) -> bool| checked.iter().find(|c| !pred(&c.3)).map(|c| c.0);
    let mut leads: BTreeMap<i64, u64> = BTreeMap::new();
    for c in &checked {
        *leads.entry(c.2).or_default() += 1;
    }
    Ok(Identities {
        pairs: checked.len() as u64,
        k8: checked.iter().filter(|c| c.1 == 8).count() as u64,
        k18: checked.iter().filter(|c| c.1 == 18).count() as u64,
        master: checked.iter().all(|c| c.3.master),
        split: checked.iter().all(|c| c.3.split),
        in_range: checked.iter().all(|c| c.3.in_range),
        range_failures: checked.iter().filter(|c| !c.3.in_range).count() as u64,
        k8_zero: checked.iter().all(|c| c.3.k8_zero),
        leads: leads.into_iter().collect(),
        first_master_failure: first(&|c| c.master),
        first_split_failure: first(&|c| c.split),
        first_range_failure: first(&|c| c.in_range),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct AppendixReport<S> {
    pub relevant_count: u64,
    pub relevant_cover: bool,
    /// Farthest conditional probability from the relevant numbers.
    #[serde(serialize_with = "exact::one")]
    pub farthest_value: S,
    #[serde(serialize_with = "exact::one")]
    pub farthest_distance: S,
    pub closeness: Closeness<S>,
    pub not_good: NotGood,
    pub trichotomy: Trichotomy,
    pub identities: Identities,
}

impl<S: Scalar> AppendixReport<S> {
    pub fn holds(&self) -> bool {
        self.relevant_cover
            && self.closeness.holds
            && self.not_good.holds
            && self.trichotomy.holds
            && self.identities.holds()
    }
}

/// Every appendix check on a block-structured structure.
pub fn verify_appendix<S: Scalar>(s: &BeliefStructure<S>) -> Result<AppendixReport<S>, DomainError> {
    let relevant = relevant_fracs(s)?;
    let closeness = check_closeness(s)?;
    let pr = ValueIndex::build(s, ValueKind::Probability)?;
    let (relevant_cover, farthest_value, farthest_distance) = relevant_cover(&pr, &relevant);
    let bel = ValueIndex::build(s, ValueKind::Belief)?;
    let (not_good, trichotomy) = verify_trichotomy(&bel, &pr, s.trigger());
    let identities = check_identities(s, &trichotomy.matches)?;
    Ok(AppendixReport {
        relevant_count: relevant.len() as u64,
        relevant_cover,
        farthest_value,
        farthest_distance,
        closeness,
        not_good,
        trichotomy,
        identities,
    })
}
