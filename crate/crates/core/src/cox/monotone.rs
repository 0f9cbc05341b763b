//! Dominance checks over keyed points `(x, y) → w` on value ids.
//!
//! Every monotonicity clause has the shape "for all points `p` dominated by
//! a query `q` (with some coordinates strict), `w_p ≤ w_q` (or `<`)". A sweep
//! in `x` order with a prefix-max tree over `y` answers all queries in
//! `O((P + Q) log Y)`. The quadratic scan in [`naive_dominance`] is the
//! oracle it is tested against.

use serde::Serialize;

/// A point or query on value ids. `tag` identifies it in its source list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Keyed {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub tag: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dominance {
    pub strict_x: bool,
    pub strict_y: bool,
    /// Violation iff the best dominated `w` is `≥ q.w` (else `> q.w`).
    pub strict_w: bool,
    /// Queries with `x = 0` are exempt.
    pub guard_x: bool,
    /// Queries with `y = 0` are exempt.
    pub guard_y: bool,
}

/// The first violating query, in `(x, y, tag)` order, and the dominated
/// point with the largest `w` (smallest tag on ties).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DominanceViolation {
    pub query: Keyed,
    pub point: Keyed,
}

const ZERO_ID: u32 = 0;

impl Dominance {
    fn exempt(&self, q: &Keyed) -> bool {
        (self.guard_x && q.x == ZERO_ID) || (self.guard_y && q.y == ZERO_ID)
    }

    fn dominated(&self, p: &Keyed, q: &Keyed) -> bool {
        let ox = if self.strict_x { p.x < q.x } else { p.x <= q.x };
        let oy = if self.strict_y { p.y < q.y } else { p.y <= q.y };
        ox && oy
    }

    fn violates(&self, best_w: u32, q: &Keyed) -> bool {
        if self.strict_w {
            best_w >= q.w
        } else {
            best_w > q.w
        }
    }
}

/// Prefix maximum over `y` of `(w + 1) << 32 | !tag`; 0 means empty.
struct MaxTree {
    t: Vec<u64>,
}

impl MaxTree {
    fn new(n: usize) -> Self {
        MaxTree { t: vec![0; n + 1] }
    }

    fn insert(&mut self, y: u32, v: u64) {
        let mut i = y as usize + 1;
        while i < self.t.len() {
            if self.t[i] < v {
                self.t[i] = v;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Max over `y' < end`.
    fn query(&self, end: usize) -> u64 {
        let mut i = end.min(self.t.len() - 1);
        let mut best = 0;
        while i > 0 {
            best = best.max(self.t[i]);
            i &= i - 1;
        }
        best
    }
}

fn pack(p: &Keyed) -> u64 {
    ((p.w as u64 + 1) << 32) | (!p.tag) as u64
}

fn unpack(v: u64) -> (u32, u32) {
    (((v >> 32) - 1) as u32, !(v as u32))
}

/// Sweep version. `y_len` bounds every `y` coordinate.
pub fn sweep_dominance(
    points: &[Keyed],
    queries: &[Keyed],
    y_len: usize,
    rule: Dominance,
) -> Option<DominanceViolation> {
    let order = |list: &[Keyed]| {
        let mut ix: Vec<u32> = (0..list.len() as u32).collect();
        ix.sort_unstable_by_key(|&i| {
            let p = &list[i as usize];
            (p.x, p.y, p.tag)
        });
        ix
    };
    let pts = order(points);
    let qs = order(queries);

    let mut tree = MaxTree::new(y_len);
    let mut next = 0;
    for &qi in &qs {
        let q = &queries[qi as usize];
        while next < pts.len() {
            let p = &points[pts[next] as usize];
            let admitted = if rule.strict_x { p.x < q.x } else { p.x <= q.x };
            if !admitted {
                break;
            }
            tree.insert(p.y, pack(p));
            next += 1;
        }
        if rule.exempt(q) {
            continue;
        }
        let end = if rule.strict_y { q.y as usize } else { q.y as usize + 1 };
        let best = tree.query(end);
        if best == 0 {
            continue;
        }
        let (w, tag) = unpack(best);
        if rule.violates(w, q) {
            let point = *points.iter().find(|p| p.tag == tag && p.w == w).expect("inserted point");
            return Some(DominanceViolation { query: *q, point });
        }
    }
    None
}

/// Quadratic oracle with the same tie-breaking as [`sweep_dominance`].
pub fn naive_dominance(points: &[Keyed], queries: &[Keyed], rule: Dominance) -> Option<DominanceViolation> {
    let mut qs: Vec<&Keyed> = queries.iter().collect();
    qs.sort_unstable_by_key(|q| (q.x, q.y, q.tag));
    for q in qs {
        if rule.exempt(q) {
            continue;
        }
        let best = points
            .iter()
            .filter(|p| rule.dominated(p, q))
            .max_by(|a, b| a.w.cmp(&b.w).then(b.tag.cmp(&a.tag)));
        if let Some(p) = best {
            if rule.violates(p.w, q) {
                return Some(DominanceViolation { query: *q, point: *p });
            }
        }
    }
    None
}

/// Clauses of the monotonicity statement for a combination table, with
/// `(x, y) → w` the larger key and `(x′, y′) → w′` any smaller one:
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `x′ ≤ x ∧ y′ ≤ y ⇒ w′ ≤ w`.
    Weak,
    /// `x′ < x ∧ y′ ≤ y ∧ x, y > 0 ⇒ w′ < w`.
    StrictFirst,
    /// `x′ ≤ x ∧ y′ < y ∧ x, y > 0 ⇒ w′ < w`.
    StrictSecond,
    /// `y′ ≤ x ∧ x′ ≤ y ⇒ w′ ≤ w` (the crossed premise).
    Crossed,
    /// `x′ < x ∧ y′ ≤ y ∧ y > 0 ⇒ w′ < w`.
    StrictFirstPositiveSecond,
}

impl Clause {
    pub const CHAIN: [Clause; 3] = [Clause::Weak, Clause::StrictFirst, Clause::StrictSecond];

    pub fn rule(self) -> Dominance {
        let d = Dominance { strict_x: false, strict_y: false, strict_w: false, guard_x: false, guard_y: false };
        match self {
            Clause::Weak | Clause::Crossed => d,
            Clause::StrictFirst => Dominance { strict_x: true, strict_w: true, guard_x: true, guard_y: true, ..d },
            Clause::StrictSecond => Dominance { strict_y: true, strict_w: true, guard_x: true, guard_y: true, ..d },
            Clause::StrictFirstPositiveSecond => Dominance { strict_x: true, strict_w: true, guard_y: true, ..d },
        }
    }

    /// Points are the keys themselves, or transposed for the crossed clause.
    pub fn points(self, keys: &[Keyed]) -> Vec<Keyed> {
        match self {
            Clause::Crossed => keys.iter().map(|k| Keyed { x: k.y, y: k.x, ..*k }).collect(),
            _ => keys.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClauseResult {
    pub clause: Clause,
    pub holds: bool,
    pub violation: Option<DominanceViolation>,
}

pub fn check_clause(keys: &[Keyed], y_len: usize, clause: Clause) -> ClauseResult {
    let transposed;
    let points = if clause == Clause::Crossed {
        transposed = clause.points(keys);
        &transposed[..]
    } else {
        keys
    };
    let violation = sweep_dominance(points, keys, y_len, clause.rule());
    ClauseResult { clause, holds: violation.is_none(), violation }
}

pub fn check_clause_naive(keys: &[Keyed], clause: Clause) -> ClauseResult {
    let violation = naive_dominance(&clause.points(keys), keys, clause.rule());
    ClauseResult { clause, holds: violation.is_none(), violation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn keys(raw: &[(u32, u32, u32)]) -> Vec<Keyed> {
        raw.iter().enumerate().map(|(i, &(x, y, w))| Keyed { x, y, w, tag: i as u32 }).collect()
    }

    const ALL: [Clause; 5] = [
        Clause::Weak,
        Clause::StrictFirst,
        Clause::StrictSecond,
        Clause::Crossed,
        Clause::StrictFirstPositiveSecond,
    ];

    #[test]
    fn product_table_is_monotone() {
        // ids 0..=4 standing for 0, 1/4, 1/2, 3/4, 1 and products on a grid
        let mut raw = Vec::new();
        let vals = [0u32, 1, 2, 3, 4];
        let mut prods: Vec<u32> = Vec::new();
        for &a in &vals {
            for &b in &vals {
                prods.push(a * b);
            }
        }
        prods.sort_unstable();
        prods.dedup();
        for &a in &vals {
            for &b in &vals {
                let w = prods.binary_search(&(a * b)).unwrap() as u32;
                raw.push((a, b, w));
            }
        }
        let k = keys(&raw);
        for c in ALL {
            assert!(check_clause(&k, 5, c).holds, "{c:?}");
        }
    }

    #[test]
    fn strictness_exempts_zero() {
        let k = keys(&[(0, 2, 0), (0, 3, 0), (1, 2, 1), (2, 2, 2)]);
        assert!(check_clause(&k, 4, Clause::StrictSecond).holds);
        let bad = keys(&[(1, 2, 1), (1, 3, 1)]);
        let r = check_clause(&bad, 4, Clause::StrictSecond);
        assert!(!r.holds);
        assert_eq!(r.violation.unwrap().query.y, 3);
    }

    proptest! {
        #[test]
        fn sweep_matches_oracle(raw in proptest::collection::vec((0u32..6, 0u32..6, 0u32..8), 0..40)) {
            let k = keys(&raw);
            for c in ALL {
                prop_assert_eq!(check_clause(&k, 6, c), check_clause_naive(&k, c));
            }
        }
    }
}
