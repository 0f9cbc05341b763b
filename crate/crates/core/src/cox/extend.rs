//! A total, continuous, commutative, monotone combination function that
//! agrees with the closed pair table on its domain.
//!
//! Let `γ` be the smallest gap between distinct values and `η = γ/4`. On the
//! lattice spanned by the coordinates of the closed domain,
//!
//! ```text
//! G(p) = η(pₓ + p_y) + max(0, max { F″(q) − η(qₓ + q_y) : q ≤ p, q > 0 })
//! ```
//!
//! and `G(p) = 0` when a coordinate is 0. Since `η(qₓ + q_y) ≤ γ/2`, the
//! maximum is attained by the dominated point with the largest value, and
//! among those by the one with the smallest coordinate sum. Monotonicity of
//! `F″` makes that point `p` itself whenever `p` is in the domain, so `G`
//! agrees with `F″` there. `G` is strictly increasing in each positive
//! coordinate, symmetric, and `G(x, 1) = x` on lattice points because every
//! value `x` has the key `(x, 1) → x`. The total function is the bilinear
//! interpolation of `G` between neighbouring lattice points, which keeps
//! all of these properties and is continuous.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::cox::monotone::Keyed;
use crate::domain::frac::cmp_sums;
use crate::domain::ValueIndex;
use crate::scalar::{exact, Scalar};

pub struct TotalCombination<'a, S: Scalar> {
    idx: &'a ValueIndex<S>,
    /// Closed domain sorted by `(x, y)`.
    data: &'a [Keyed],
    /// Sorted coordinate ids, including 0 and 1.
    lattice: Vec<u32>,
    eta: S,
}

/// Prefix-best tree over `y` holding data positions.
struct BestTree<'d, S: Scalar> {
    t: Vec<u32>,
    data: &'d [Keyed],
    idx: &'d ValueIndex<S>,
}

const EMPTY: u32 = u32::MAX;

impl<'d, S: Scalar> BestTree<'d, S> {
    fn new(len: usize, data: &'d [Keyed], idx: &'d ValueIndex<S>) -> Self {
        BestTree { t: vec![EMPTY; len + 1], data, idx }
    }

    /// Larger value first, then smaller coordinate sum, then position.
    fn better(&self, a: u32, b: u32) -> bool {
        if b == EMPTY {
            return a != EMPTY;
        }
        if a == EMPTY {
            return false;
        }
        let (p, q) = (&self.data[a as usize], &self.data[b as usize]);
        match p.w.cmp(&q.w) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                let i = self.idx;
                match cmp_sums(i.frac(p.x), i.frac(p.y), i.frac(q.x), i.frac(q.y)) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => a < b,
                }
            }
        }
    }

    fn insert(&mut self, y: u32, pos: u32) {
        let mut i = y as usize + 1;
        while i < self.t.len() {
            if self.better(pos, self.t[i]) {
                self.t[i] = pos;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Best over `y′ ≤ y`.
    fn query(&self, y: u32) -> u32 {
        let mut i = (y as usize + 1).min(self.t.len() - 1);
        let mut best = EMPTY;
        while i > 0 {
            if self.better(self.t[i], best) {
                best = self.t[i];
            }
            i &= i - 1;
        }
        best
    }
}

/// A data point where `G` does not reproduce the table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub point: Keyed,
    /// The dominated point that attains the maximum instead.
    pub best: Keyed,
}

impl<'a, S: Scalar> TotalCombination<'a, S> {
    /// `data` must be sorted by `(x, y)` and contain `(x, 1) → x` and
    /// `(1, y) → y` for its coordinates, as the closed domain of
    /// [`crate::cox::closure::closed_domain`] and the plain table keys of
    /// [`crate::cox::closure::keyed`] do.
    pub fn new(idx: &'a ValueIndex<S>, data: &'a [Keyed]) -> Self {
        let mut lattice: Vec<u32> = data.iter().flat_map(|k| [k.x, k.y]).collect();
        lattice.push(idx.zero_id());
        lattice.push(idx.one_id());
        lattice.sort_unstable();
        lattice.dedup();
        let gap = idx.min_gap().unwrap_or_else(S::one);
        TotalCombination { idx, data, lattice, eta: gap / S::from_int(4) }
    }

    pub fn eta(&self) -> &S {
        &self.eta
    }

    pub fn lattice_size(&self) -> usize {
        self.lattice.len()
    }

    /// For each query `(x, y)` of ids, the position in `data` of the best
    /// dominated positive point, if any.
    fn best_dominated(&self, queries: &[(u32, u32)]) -> Vec<Option<u32>> {
        let mut order: Vec<u32> = (0..queries.len() as u32).collect();
        order.sort_unstable_by_key(|&i| queries[i as usize]);
        let mut tree = BestTree::new(self.idx.len(), self.data, self.idx);
        let mut out = vec![None; queries.len()];
        let mut next = 0;
        for i in order {
            let (qx, qy) = queries[i as usize];
            while next < self.data.len() && self.data[next].x <= qx {
                let p = &self.data[next];
                if p.x != 0 && p.y != 0 {
                    tree.insert(p.y, next as u32);
                }
                next += 1;
            }
            let b = tree.query(qy);
            out[i as usize] = (b != EMPTY).then_some(b);
        }
        out
    }

    fn g_value(&self, p: (u32, u32), best: Option<u32>) -> S {
        let zero = self.idx.zero_id();
        if p.0 == zero || p.1 == zero {
            return S::zero();
        }
        let v = |id: u32| self.idx.value(id).clone();
        let mut g = self.eta.clone() * (v(p.0) + v(p.1));
        if let Some(b) = best {
            let q = &self.data[b as usize];
            let term = v(q.w) - self.eta.clone() * (v(q.x) + v(q.y));
            if term > S::zero() {
                g = g + term;
            }
        }
        g
    }

    /// `G` at lattice points given as id pairs.
    pub fn lattice_values(&self, points: &[(u32, u32)]) -> Vec<S> {
        let best = self.best_dominated(points);
        points.par_iter().zip(best.par_iter()).map(|(&p, &b)| self.g_value(p, b)).collect()
    }

    /// Neighbouring lattice ids `lo ≤ a ≤ hi` (equal when `a` is on the
    /// lattice).
    fn bracket(&self, a: &S) -> (u32, u32) {
        let pos = self.lattice.partition_point(|&id| self.idx.value(id) < a);
        if pos < self.lattice.len() && self.idx.value(self.lattice[pos]) == a {
            let id = self.lattice[pos];
            return (id, id);
        }
        assert!(pos > 0 && pos < self.lattice.len(), "argument outside [0, 1]");
        (self.lattice[pos - 1], self.lattice[pos])
    }

    /// Evaluates the interpolated function at arbitrary points of `[0, 1]²`.
    pub fn eval_points(&self, points: &[(S, S)]) -> Vec<S> {
        let brackets: Vec<((u32, u32), (u32, u32))> =
            points.iter().map(|(a, b)| (self.bracket(a), self.bracket(b))).collect();
        let mut corners: Vec<(u32, u32)> = brackets
            .iter()
            .flat_map(|&((x0, x1), (y0, y1))| [(x0, y0), (x1, y0), (x0, y1), (x1, y1)])
            .collect();
        corners.sort_unstable();
        corners.dedup();
        let g = self.lattice_values(&corners);
        let at = |c: (u32, u32)| &g[corners.binary_search(&c).expect("corner computed")];
        let v = |id: u32| self.idx.value(id).clone();
        let frac = |t: &S, lo: u32, hi: u32| {
            if lo == hi {
                S::zero()
            } else {
                (t.clone() - v(lo)) / (v(hi) - v(lo))
            }
        };
        points
            .iter()
            .zip(&brackets)
            .map(|((a, b), &((x0, x1), (y0, y1)))| {
                let t = frac(a, x0, x1);
                let s = frac(b, y0, y1);
                let one = S::one();
                let (ct, cs) = (one.clone() - &t, one - &s);
                ct.clone() * &cs * at((x0, y0))
                    + t.clone() * &cs * at((x1, y0))
                    + ct * &s * at((x0, y1))
                    + t * &s * at((x1, y1))
            })
            .collect()
    }

    /// Values at `(i/r, j/r)` for `0 ≤ i, j ≤ r`, indexed `[i][j]`.
    pub fn eval_grid(&self, r: u32) -> Vec<Vec<S>> {
        let coord = |i: u32| S::from_int(i as i64) / S::from_int(r as i64);
        let points: Vec<(S, S)> = (0..=r).flat_map(|i| (0..=r).map(move |j| (coord(i), coord(j)))).collect();
        let flat = self.eval_points(&points);
        flat.chunks(r as usize + 1).map(|c| c.to_vec()).collect()
    }

    /// First data point, in `(x, y)` order, where `G ≠ F″`.
    pub fn check_agreement(&self) -> Option<Disagreement> {
        let positive: Vec<u32> =
            (0..self.data.len() as u32).filter(|&i| self.data[i as usize].x != 0 && self.data[i as usize].y != 0).collect();
        let queries: Vec<(u32, u32)> = positive.iter().map(|&i| (self.data[i as usize].x, self.data[i as usize].y)).collect();
        let best = self.best_dominated(&queries);
        let zero = self.data.iter().find(|k| (k.x == 0 || k.y == 0) && k.w != 0);
        if let Some(k) = zero {
            return Some(Disagreement { point: *k, best: *k });
        }
        positive.iter().zip(best).find_map(|(&i, b)| {
            let p = self.data[i as usize];
            let q = self.data[b.expect("a point dominates itself") as usize];
            let same = q.w == p.w
                && cmp_sums(self.idx.frac(p.x), self.idx.frac(p.y), self.idx.frac(q.x), self.idx.frac(q.y))
                    == Ordering::Equal;
            (!same).then_some(Disagreement { point: p, best: q })
        })
    }

    /// Checks the grid and the data points.
    pub fn check(&self, r: u32) -> ExtensionReport<S> {
        let grid = self.eval_grid(r);
        let n = r as usize;
        let coord = |i: usize| S::from_int(i as i64) / S::from_int(r as i64);
        let mut failures = Vec::new();
        let (mut boundary, mut commutative, mut monotone) = (true, true, true);
        let mut note = |what: &'static str, i: usize, j: usize| {
            if failures.len() < 16 {
                failures.push(GridFailure { property: what, i: i as u32, j: j as u32 });
            }
        };
        for i in 0..=n {
            if grid[i][n] != coord(i) || grid[n][i] != coord(i) {
                boundary = false;
                note("unit", i, n);
            }
            if !grid[i][0].is_zero() || !grid[0][i].is_zero() {
                boundary = false;
                note("zero", i, 0);
            }
            for j in 0..=n {
                if grid[i][j] != grid[j][i] {
                    commutative = false;
                    note("commutative", i, j);
                }
                if i < n {
                    // rows and columns, strict when the other argument is positive
                    for (a, b) in [(&grid[i][j], &grid[i + 1][j]), (&grid[j][i], &grid[j][i + 1])] {
                        if a > b || (j > 0 && a == b) {
                            monotone = false;
                            note("monotone", i, j);
                        }
                    }
                }
            }
        }
        let agreement = self.check_agreement();
        ExtensionReport {
            resolution: r,
            lattice_size: self.lattice.len(),
            eta: self.eta.clone(),
            data_points: self.data.len() as u64,
            boundary,
            commutative,
            monotone,
            grid_failures: failures,
            agreement,
            grid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GridFailure {
    pub property: &'static str,
    pub i: u32,
    pub j: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct ExtensionReport<S> {
    pub resolution: u32,
    pub lattice_size: usize,
    #[serde(serialize_with = "exact::one")]
    pub eta: S,
    pub data_points: u64,
    /// `F(x, 1) = F(1, x) = x` and `F(x, 0) = F(0, x) = 0` on the grid.
    pub boundary: bool,
    pub commutative: bool,
    /// Rows and columns increase, strictly when the fixed argument is positive.
    pub monotone: bool,
    pub grid_failures: Vec<GridFailure>,
    /// First data point the function does not reproduce.
    pub agreement: Option<Disagreement>,
    /// Values at `(i/r, j/r)`.
    #[serde(serialize_with = "exact::grid")]
    pub grid: Vec<Vec<S>>,
}

impl<S> ExtensionReport<S> {
    pub fn holds(&self) -> bool {
        self.boundary && self.commutative && self.monotone && self.agreement.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::closure::closed_domain;
    use crate::cox::pairs::PairTable;
    use crate::domain::constructions::small_perturbed;
    use crate::domain::ValueKind;
    use crate::Rational;

    fn naive_g<S: Scalar>(idx: &ValueIndex<S>, data: &[Keyed], eta: &S, p: (u32, u32)) -> S {
        if p.0 == 0 || p.1 == 0 {
            return S::zero();
        }
        let v = |id: u32| idx.value(id).clone();
        let best = data
            .iter()
            .filter(|q| q.x != 0 && q.y != 0 && q.x <= p.0 && q.y <= p.1)
            .map(|q| v(q.w) - eta.clone() * (v(q.x) + v(q.y)))
            .max()
            .unwrap_or_else(S::zero)
            .max(S::zero());
        eta.clone() * (v(p.0) + v(p.1)) + best
    }

    #[test]
    fn sweep_matches_direct_maximum() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let d = closed_domain(&t).unwrap();
        let ext = TotalCombination::new(&idx, &d);
        let pts: Vec<(u32, u32)> =
            ext.lattice.iter().flat_map(|&a| ext.lattice.iter().map(move |&b| (a, b))).collect();
        let fast = ext.lattice_values(&pts);
        for (p, g) in pts.iter().zip(&fast) {
            assert_eq!(g, &naive_g(&idx, &d, ext.eta(), *p));
        }
    }

    #[test]
    fn probability_extension_checks_pass() {
        let s = small_perturbed().unperturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let d = closed_domain(&t).unwrap();
        let ext = TotalCombination::new(&idx, &d);
        let r = ext.check(12);
        assert!(r.holds(), "{:?} {:?}", r.grid_failures, r.agreement);
        assert_eq!(r.grid[3][12], Rational::new(1.into(), 4.into()));
        // data points are reproduced by interpolation too
        let pts: Vec<(Rational, Rational)> =
            d.iter().take(50).map(|k| (idx.value(k.x).clone(), idx.value(k.y).clone())).collect();
        let vals = ext.eval_points(&pts);
        for (k, v) in d.iter().zip(vals) {
            assert_eq!(&v, idx.value(k.w));
        }
    }

    #[test]
    fn disagreement_is_the_strict_monotonicity_failure() {
        // the toy's closed table is weakly but not strictly monotone
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        let d = closed_domain(&t).unwrap();
        let strict = crate::cox::monotone::check_clause(&d, idx.len(), crate::cox::monotone::Clause::StrictFirst);
        let v = strict.violation.unwrap();
        let ext = TotalCombination::new(&idx, &d);
        let bad = ext.check_agreement().unwrap();
        assert_eq!((bad.point, bad.best), (v.query, v.point));
        let r = ext.check(8);
        assert!(!r.holds());
        assert!(r.boundary && r.commutative && r.monotone);

        // the unclosed table is strictly monotone: reproduced, not symmetric
        let keys = crate::cox::closure::keyed(&t);
        let plain = TotalCombination::new(&idx, &keys);
        let r = plain.check(8);
        assert_eq!(r.agreement, None);
        assert!(r.boundary && r.monotone);
    }

    #[test]
    fn non_monotone_data_is_not_reproduced() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let one = idx.one_id();
        // (2, 2) → 3 dominates (3, 3) → 2
        let data = vec![
            Keyed { x: 2, y: 2, w: 3, tag: 0 },
            Keyed { x: 3, y: 3, w: 2, tag: 1 },
            Keyed { x: one, y: one, w: one, tag: 2 },
        ];
        let ext = TotalCombination::new(&idx, &data);
        let bad = ext.check_agreement().unwrap();
        assert_eq!(bad.point.x, 3);
        assert_eq!(bad.best.x, 2);
    }
}
