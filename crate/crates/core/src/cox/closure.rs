//! The commutative closure `F″` of the pair table and the two structural
//! claims behind it: symmetric keys involve the unit, and keys realized by a
//! chain avoiding the trigger multiply.

use rayon::prelude::*;
use serde::Serialize;

use crate::cox::monotone::{check_clause, Clause, ClauseResult, Keyed};
use crate::cox::pairs::PairTable;
use crate::domain::frac::product_equals;
use crate::domain::ValueIndex;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosureReport {
    /// Keys `(x, y)`, `x ≠ y`, whose transpose is also a key.
    pub symmetric_keys: u64,
    /// Whether every symmetric key has `x = 1` or `y = 1`.
    pub unit_claim: bool,
    pub unit_violation: Option<(u32, u32)>,
    /// Keys `(x, x)` with `x ≠ 1`; they are their own transpose.
    pub diagonal_keys: u64,
    /// `(x, y)` and `(y, x)` both keys with different values.
    pub conflict: Option<(u32, u32)>,
    /// Keys with at least one chain whose top set misses the trigger.
    pub free_keys: u64,
    /// Keys with chains of both kinds.
    pub mixed_keys: u64,
    /// Whether `F(x, y) = x·y` on every free key.
    pub product_claim: bool,
    pub product_violation: Option<(u32, u32)>,
    /// Size of the closed domain.
    pub closed_keys: u64,
    pub monotone: Vec<ClauseResult>,
}

impl ClosureReport {
    pub fn holds(&self) -> bool {
        self.unit_claim && self.conflict.is_none() && self.product_claim && self.monotone.iter().all(|c| c.holds)
    }
}

/// Keys sorted by `(x, y)`; `tag` is the position.
pub fn keyed(table: &PairTable) -> Vec<Keyed> {
    let mut keys: Vec<Keyed> = table.iter().map(|(x, y, e)| Keyed { x, y, w: e.w, tag: 0 }).collect();
    keys.par_sort_unstable_by_key(|k| (k.x, k.y));
    for (i, k) in keys.iter_mut().enumerate() {
        k.tag = i as u32;
    }
    keys
}

/// `D ∪ Dᵀ` with `F″(y, x) = F(x, y)`, sorted by `(x, y)`. Returns the first
/// conflicting key instead if the closure is not a function.
pub fn closed_domain(table: &PairTable) -> Result<Vec<Keyed>, (u32, u32)> {
    close_keys(&keyed(table))
}

/// [`closed_domain`] from keys sorted by `(x, y)`; the conflict reported is
/// the first in that order.
pub fn close_keys(keys: &[Keyed]) -> Result<Vec<Keyed>, (u32, u32)> {
    let find = |x: u32, y: u32| keys.binary_search_by_key(&(x, y), |k| (k.x, k.y)).ok().map(|i| keys[i].w);
    let mut out: Vec<Keyed> = Vec::with_capacity(keys.len() * 2);
    for k in keys {
        out.push(Keyed { tag: 0, ..*k });
        match find(k.y, k.x) {
            Some(w) if w != k.w => return Err((k.x.min(k.y), k.x.max(k.y))),
            Some(_) => {}
            None => out.push(Keyed { x: k.y, y: k.x, w: k.w, tag: 0 }),
        }
    }
    out.par_sort_unstable_by_key(|k| (k.x, k.y));
    for (i, k) in out.iter_mut().enumerate() {
        k.tag = i as u32;
    }
    Ok(out)
}

pub fn check_closure<S: Scalar>(idx: &ValueIndex<S>, table: &PairTable) -> ClosureReport {
    let one = idx.one_id();
    let mut symmetric = 0u64;
    let mut diagonal = 0u64;
    let mut unit_violation: Option<(u32, u32)> = None;
    for (x, y, _) in table.iter() {
        if x == y {
            if x != one {
                diagonal += 1;
            }
            continue;
        }
        if table.get(y, x).is_some() {
            symmetric += 1;
            if x != one && y != one {
                let k = (x.min(y), x.max(y));
                if unit_violation.is_none_or(|v| k < v) {
                    unit_violation = Some(k);
                }
            }
        }
    }

    let free: Vec<(u32, u32, u32)> =
        table.iter().filter(|(_, _, e)| e.free_witness().is_some()).map(|(x, y, e)| (x, y, e.w)).collect();
    let mixed = table.iter().filter(|(_, _, e)| e.free_witness().is_some() && e.triggered_witness().is_some()).count();
    let product_violation = free
        .par_iter()
        .filter(|&&(x, y, w)| !product_equals(idx.frac(x), idx.frac(y), idx.frac(w)))
        .map(|&(x, y, _)| (x, y))
        .min();

    let (conflict, closed, monotone) = match closed_domain(table) {
        Err(k) => (Some(k), 0, Vec::new()),
        Ok(d) => {
            let clauses = Clause::CHAIN.iter().map(|&c| check_clause(&d, idx.len(), c)).collect();
            (None, d.len() as u64, clauses)
        }
    };

    ClosureReport {
        symmetric_keys: symmetric,
        unit_claim: unit_violation.is_none(),
        unit_violation,
        diagonal_keys: diagonal,
        conflict,
        free_keys: free.len() as u64,
        mixed_keys: mixed as u64,
        product_claim: product_violation.is_none(),
        product_violation,
        closed_keys: closed,
        monotone,
    }
}

/// First key, by `(x, y)`, where `F(x, y) ≠ x·y`, over all keys.
pub fn product_law_violation<S: Scalar>(idx: &ValueIndex<S>, table: &PairTable) -> Option<(u32, u32)> {
    let keys: Vec<(u32, u32, u32)> = table.iter().map(|(x, y, e)| (x, y, e.w)).collect();
    keys.par_iter()
        .filter(|&&(x, y, w)| !product_equals(idx.frac(x), idx.frac(y), idx.frac(w)))
        .map(|&(x, y, _)| (x, y))
        .min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::constructions::small_perturbed;
    use crate::domain::ValueKind;

    #[test]
    fn probability_keys_are_all_free_products() {
        let s = small_perturbed().unperturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let r = check_closure(&idx, &t);
        assert_eq!(r.free_keys, t.len() as u64);
        assert!(r.product_claim);
        assert!(r.holds());
        assert_eq!(product_law_violation(&idx, &t), None);
    }

    #[test]
    fn toy_closure_keeps_weak_but_not_strict_order() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let r = check_closure(&idx, &t);
        assert!(r.unit_claim && r.product_claim && r.conflict.is_none());
        assert!(r.free_keys > 0 && r.mixed_keys > 0);
        assert!(r.closed_keys >= t.len() as u64);
        assert!(r.monotone[0].holds);
        assert!(!r.monotone[1].holds);
        // the table itself is strictly monotone; only the transposes break it
        assert!(crate::cox::check_monotone(&t, idx.len()).iter().all(|c| c.holds));
    }
}
