//! Whether a one-to-one rescaling `g` with
//! `g(Bel(V|U))·g(Bel(U)) = g(Bel(V∩U))` exists on the value set.
//!
//! With `g(0) = 0` every instance with `V∩U = ∅` holds trivially and all
//! others involve nonzero values only, so taking `L = −log g` turns them into
//! homogeneous linear equations `L_c + L_u − L_a = 0`. A forced equality
//! `L_v = L_{v′}` between distinct values rules out injectivity. The branch
//! `g(0) ≠ 0` is closed separately: the empty-`V` instances force `g = 1` on
//! every unconditional value, which is not injective as soon as there are
//! two of them.
//!
//! Unconditional values ("basic" variables) number at most `2^n`. Every
//! other value `c` is pinned by the first equation it appears in,
//! `L_c = L_a − L_u`; each further equation with the same `c` becomes a
//! constraint among basics. Those constraints are eliminated exactly, with
//! the combination of source equations kept alongside each row so that
//! forced equalities come with a certificate that replays.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::domain::frac::product_equals;
use crate::domain::ValueIndex;
use crate::event::EventSet;
use crate::scalar::{exact, Scalar};
use crate::Rational;

/// `V ⊊ U` with `Bel(V) ≥ Bel(U)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Injectivity {
    pub pairs: u64,
    pub violation: Option<(EventSet, EventSet)>,
}

impl Injectivity {
    pub fn holds(&self) -> bool {
        self.violation.is_none()
    }
}

/// Exhaustive over nested pairs `V ⊊ U`.
pub fn unconditional_injectivity<S: Scalar>(idx: &ValueIndex<S>) -> Injectivity {
    let w = EventSet::full(idx.world_count());
    let mut pairs = 0;
    for u in w.subsets() {
        let top = idx.frac_at(u, w).num;
        for v in u.subsets() {
            if v == u {
                continue;
            }
            pairs += 1;
            if idx.frac_at(v, w).num >= top {
                return Injectivity { pairs, violation: Some((v, u)) };
            }
        }
    }
    Injectivity { pairs, violation: None }
}

/// `L_c + L_u − L_a = 0` with `c = Bel(A|U)`, `u = Bel(U)`, `a = Bel(A)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Equation {
    pub c: u32,
    pub u: u32,
    pub a: u32,
    /// Smallest `(U, A)` realizing the value triple.
    pub set_u: EventSet,
    pub set_a: EventSet,
}

#[derive(Clone, Debug)]
pub struct LogLinearSystem {
    /// Nonzero value ids, ascending.
    pub variables: Vec<u32>,
    /// Ids of the unconditional values `Bel(U)`, `U ≠ ∅`, ascending.
    pub basics: Vec<u32>,
    /// Deduplicated by `(c, u, a)`, sorted by it.
    pub equations: Vec<Equation>,
    /// Instances before deduplication.
    pub instances: u64,
    pub one: u32,
}

pub fn build_system<S: Scalar>(idx: &ValueIndex<S>) -> LogLinearSystem {
    let w = EventSet::full(idx.world_count());
    let mut seen: FxHashMap<(u32, u32, u32), (EventSet, EventSet)> = FxHashMap::default();
    let mut instances = 0;
    for u in w.subsets().skip(1) {
        let lu = idx.id(u, w);
        for a in u.subsets().skip(1) {
            instances += 1;
            seen.entry((idx.id(a, u), lu, idx.id(a, w))).or_insert((u, a));
        }
    }
    let mut equations: Vec<Equation> =
        seen.into_iter().map(|((c, u, a), (su, sa))| Equation { c, u, a, set_u: su, set_a: sa }).collect();
    equations.sort_unstable_by_key(|e| (e.c, e.u, e.a));
    let mut basics: Vec<u32> = w.subsets().skip(1).map(|u| idx.id(u, w)).collect();
    basics.sort_unstable();
    basics.dedup();
    let mut variables: Vec<u32> = equations.iter().flat_map(|e| [e.c, e.u, e.a]).collect();
    variables.sort_unstable();
    variables.dedup();
    LogLinearSystem { variables, basics, equations, instances, one: idx.one_id() }
}

type Sparse = Vec<(u32, Rational)>;

/// `a + k·b` for sorted sparse vectors.
fn axpy(a: &Sparse, k: &Rational, b: &Sparse) -> Sparse {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, k * &b[j].1));
            j += 1;
        } else {
            let v = &a[i].1 + k * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

fn sparse(terms: &[(u32, i64)]) -> Sparse {
    let mut m: BTreeMap<u32, i64> = BTreeMap::new();
    for &(k, v) in terms {
        *m.entry(k).or_default() += v;
    }
    m.into_iter().filter(|(_, v)| *v != 0).map(|(k, v)| (k, Rational::from_integer(v.into()))).collect()
}

/// A row over basic columns with its combination of source equations.
#[derive(Clone, Debug)]
struct Row {
    terms: Sparse,
    provenance: Sparse,
}

/// Echelon form of the basic constraints.
pub struct Elimination<'s> {
    system: &'s LogLinearSystem,
    col: FxHashMap<u32, u32>,
    /// For each non-basic variable, the index of its defining equation.
    defining: FxHashMap<u32, u32>,
    pivots: Vec<Option<Row>>,
    pub rank: usize,
    pub constraints: usize,
}

impl<'s> Elimination<'s> {
    pub fn new(system: &'s LogLinearSystem) -> Self {
        let col: FxHashMap<u32, u32> = system.basics.iter().enumerate().map(|(i, &b)| (b, i as u32)).collect();
        let mut defining: FxHashMap<u32, u32> = FxHashMap::default();
        let mut el = Elimination {
            system,
            pivots: vec![None; col.len()],
            col,
            defining: FxHashMap::default(),
            rank: 0,
            constraints: 0,
        };
        for (i, e) in system.equations.iter().enumerate() {
            let i = i as u32;
            let row = if el.col.contains_key(&e.c) {
                Row {
                    terms: sparse(&[(el.col[&e.c], 1), (el.col[&e.u], 1), (el.col[&e.a], -1)]),
                    provenance: sparse(&[(i, 1)]),
                }
            } else if let Some(&d) = defining.get(&e.c) {
                let f = &system.equations[d as usize];
                Row {
                    terms: sparse(&[(el.col[&e.u], 1), (el.col[&e.a], -1), (el.col[&f.u], -1), (el.col[&f.a], 1)]),
                    provenance: sparse(&[(i, 1), (d, -1)]),
                }
            } else {
                defining.insert(e.c, i);
                continue;
            };
            el.constraints += 1;
            el.insert(row);
        }
        el.defining = defining;
        el
    }

    fn reduce(&self, mut row: Row) -> Row {
        while let Some((lead, coef)) = row.terms.first().cloned() {
            let Some(p) = &self.pivots[lead as usize] else { break };
            let k = -(coef / &p.terms[0].1);
            row.terms = axpy(&row.terms, &k, &p.terms);
            row.provenance = axpy(&row.provenance, &k, &p.provenance);
        }
        row
    }

    fn insert(&mut self, row: Row) {
        let row = self.reduce(row);
        if let Some(lead) = row.terms.first().map(|t| t.0) {
            self.pivots[lead as usize] = Some(row);
            self.rank += 1;
        }
    }

    /// `e_v` over basic columns, with the equations used to substitute a
    /// non-basic `v`.
    fn unit(&self, v: u32) -> Row {
        if let Some(&c) = self.col.get(&v) {
            return Row { terms: sparse(&[(c, 1)]), provenance: Vec::new() };
        }
        let d = self.defining[&v];
        let e = &self.system.equations[d as usize];
        // L_v = L_a − L_u, using the defining equation once
        Row { terms: sparse(&[(self.col[&e.a], 1), (self.col[&e.u], -1)]), provenance: sparse(&[(d, 1)]) }
    }

    /// A combination of equations summing to `L_v − L_w`, if one exists.
    pub fn forced_equal(&self, v: u32, w: u32) -> Option<Vec<(u32, Rational)>> {
        let (a, b) = (self.unit(v), self.unit(w));
        let m1 = -Rational::one();
        // invariant: terms = (e_v − e_w) + Σ provenance, as in reduce
        let diff = Row { terms: axpy(&a.terms, &m1, &b.terms), provenance: axpy(&b.provenance, &m1, &a.provenance) };
        let r = self.reduce(diff);
        r.terms.is_empty().then(|| r.provenance.into_iter().map(|(i, k)| (i, -k)).collect())
    }

    /// Values of every variable under `k` random assignments of the free
    /// basic columns, modulo a 61-bit prime.
    fn fingerprints(&self, k: usize, seed: u64) -> FxHashMap<u32, Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.pivots.len();
        let mut vals = vec![vec![0u64; k]; n];
        for c in (0..n).rev() {
            match &self.pivots[c] {
                None => vals[c].iter_mut().for_each(|x| *x = rng.gen_range(1..P)),
                Some(row) => {
                    let lead = modp(&row.terms[0].1);
                    let inv = pow_mod(lead, P - 2);
                    for t in 0..k {
                        let mut s = 0u64;
                        for (j, coef) in &row.terms[1..] {
                            s = add_mod(s, mul_mod(modp(coef), vals[*j as usize][t]));
                        }
                        vals[c][t] = mul_mod(P - s % P, inv) % P;
                    }
                }
            }
        }
        let mut out: FxHashMap<u32, Vec<u64>> = FxHashMap::default();
        for (&b, &c) in &self.col {
            out.insert(b, vals[c as usize].clone());
        }
        for (&v, &d) in &self.defining {
            let e = &self.system.equations[d as usize];
            let (a, u) = (&out[&e.a], &out[&e.u]);
            let fp = a.iter().zip(u).map(|(x, y)| add_mod(*x, P - y)).collect();
            out.insert(v, fp);
        }
        out
    }

    /// Exact basis of the solution space restricted to basic columns.
    fn null_basis(&self) -> Vec<Vec<Rational>> {
        let n = self.pivots.len();
        let free: Vec<usize> = (0..n).filter(|&c| self.pivots[c].is_none()).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![Rational::zero(); n];
                x[f] = Rational::one();
                for c in (0..n).rev() {
                    if let Some(row) = &self.pivots[c] {
                        let s: Rational = row.terms[1..].iter().map(|(j, k)| k * &x[*j as usize]).sum();
                        x[c] = -(s / &row.terms[0].1);
                    }
                }
                x
            })
            .collect()
    }
}

const P: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn add_mod(a: u64, b: u64) -> u64 {
    (a + b) % P
}

fn pow_mod(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b);
        }
        b = mul_mod(b, b);
        e >>= 1;
    }
    r
}

fn modp(q: &Rational) -> u64 {
    let p = BigInt::from(P);
    let red = |x: &BigInt| -> u64 {
        let m = ((x % &p) + &p) % &p;
        u64::try_from(m).expect("reduced below the modulus")
    };
    let d = red(q.denom());
    assert!(d != 0, "denominator divisible by the fingerprint modulus");
    mul_mod(red(q.numer()), pow_mod(d, P - 2))
}

/// One equation with its coefficient in a certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateStep {
    pub equation: Equation,
    #[serde(serialize_with = "exact::one")]
    pub coefficient: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    /// `L_v = L_w` is forced, with `v < w`.
    pub v: u32,
    pub w: u32,
    pub steps: Vec<CertificateStep>,
}

impl Certificate {
    /// Sums the cited equations and checks the result is exactly `L_v − L_w`.
    pub fn replays(&self) -> bool {
        let mut total: BTreeMap<u32, Rational> = BTreeMap::new();
        for s in &self.steps {
            let e = &s.equation;
            for (id, sign) in [(e.c, 1), (e.u, 1), (e.a, -1)] {
                *total.entry(id).or_insert_with(Rational::zero) += &s.coefficient * Rational::from_integer(sign.into());
            }
        }
        total.retain(|_, k| !k.is_zero());
        let mut want = BTreeMap::new();
        want.insert(self.v, Rational::one());
        want.insert(self.w, -Rational::one());
        self.v != self.w && total == want
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case", bound(serialize = "S: Scalar"))]
pub enum Verdict<S> {
    Infeasible {
        certificate: Certificate,
        /// Classes of at least two values forced equal.
        forced_classes: Vec<Vec<u32>>,
    },
    Feasible {
        /// `true` when `g` is the identity.
        identity: bool,
        /// `value → g(value)` for every value, including 0 and 1, when an
        /// explicit injective assignment was found.
        #[serde(serialize_with = "exact::pairs")]
        assignment: Option<Vec<(S, S)>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(bound(serialize = "S: Scalar"))]
pub struct RescalingReport<S> {
    pub values: usize,
    pub instances: u64,
    pub equations: usize,
    pub basics: usize,
    pub constraints: usize,
    pub rank: usize,
    /// `g(0) ≠ 0` is ruled out (at least two distinct unconditional values).
    pub zero_branch_closed: bool,
    pub injectivity: Injectivity,
    pub verdict: Verdict<S>,
}

impl<S> RescalingReport<S> {
    pub fn feasible(&self) -> bool {
        matches!(self.verdict, Verdict::Feasible { .. }) || !self.zero_branch_closed
    }
}

/// Classes of variables with equal fingerprints, verified exactly.
pub fn forced_classes(el: &Elimination<'_>, seed: u64) -> Vec<Vec<u32>> {
    let fp = el.fingerprints(2, seed);
    let mut groups: FxHashMap<&Vec<u64>, Vec<u32>> = FxHashMap::default();
    for (v, f) in &fp {
        groups.entry(f).or_default().push(*v);
    }
    let mut classes = Vec::new();
    for (_, mut g) in groups {
        if g.len() < 2 {
            continue;
        }
        g.sort_unstable();
        // split the candidate group into exact classes
        while let Some(&rep) = g.first() {
            let (same, rest): (Vec<u32>, Vec<u32>) =
                g.iter().partition(|&&v| v == rep || el.forced_equal(rep, v).is_some());
            if same.len() > 1 {
                classes.push(same);
            }
            g = rest;
        }
    }
    classes.sort();
    classes
}

/// Quadratic oracle: every pair checked exactly.
pub fn forced_classes_pairwise(el: &Elimination<'_>) -> Vec<Vec<u32>> {
    let vars = &el.system.variables;
    let mut done: FxHashSet<u32> = FxHashSet::default();
    let mut classes = Vec::new();
    for (i, &v) in vars.iter().enumerate() {
        if done.contains(&v) {
            continue;
        }
        let mut class = vec![v];
        for &w in &vars[i + 1..] {
            if el.forced_equal(v, w).is_some() {
                class.push(w);
                done.insert(w);
            }
        }
        if class.len() > 1 {
            classes.push(class);
        }
    }
    classes
}

fn certificate(el: &Elimination<'_>, v: u32, w: u32) -> Option<Certificate> {
    let combo = el.forced_equal(v, w)?;
    let steps = combo
        .into_iter()
        .map(|(i, k)| CertificateStep { equation: el.system.equations[i as usize], coefficient: k })
        .collect();
    Some(Certificate { v, w, steps })
}

/// Decides feasibility. `preferred` lists value pairs to certify first when
/// they are forced equal (e.g. the two sides of an associativity failure);
/// otherwise the smallest pair of the first forced class is certified.
pub fn solve<S: Scalar>(idx: &ValueIndex<S>, system: &LogLinearSystem, preferred: &[(u32, u32)], seed: u64) -> RescalingReport<S> {
    let el = Elimination::new(system);
    let classes = forced_classes(&el, seed);
    let zero_branch_closed = system.basics.len() >= 2;
    let injectivity = unconditional_injectivity(idx);
    let verdict = if classes.is_empty() {
        feasible_assignment(idx, system, &el, seed)
    } else {
        let cert = preferred
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .find_map(|(a, b)| certificate(&el, a, b))
            .or_else(|| certificate(&el, classes[0][0], classes[0][1]))
            .expect("a forced class has a certificate");
        Verdict::Infeasible { certificate: cert, forced_classes: classes }
    };
    RescalingReport {
        values: idx.len(),
        instances: system.instances,
        equations: system.equations.len(),
        basics: system.basics.len(),
        constraints: el.constraints,
        rank: el.rank,
        zero_branch_closed,
        injectivity,
        verdict,
    }
}

fn feasible_assignment<S: Scalar>(
    idx: &ValueIndex<S>,
    system: &LogLinearSystem,
    el: &Elimination<'_>,
    seed: u64,
) -> Verdict<S> {
    let identity =
        system.equations.iter().all(|e| product_equals(idx.frac(e.c), idx.frac(e.u), idx.frac(e.a)));
    if identity {
        let assignment = (0..idx.len() as u32).map(|v| (idx.value(v).clone(), idx.value(v).clone())).collect();
        return Verdict::Feasible { identity, assignment: Some(assignment) };
    }
    Verdict::Feasible { identity, assignment: dyadic_assignment(idx, system, el, seed) }
}

/// `g(v) = 2^(−ℓ_v)` for a positive integer solution `ℓ` with distinct
/// entries, from random small combinations of a null-space basis.
fn dyadic_assignment<S: Scalar>(
    idx: &ValueIndex<S>,
    system: &LogLinearSystem,
    el: &Elimination<'_>,
    seed: u64,
) -> Option<Vec<(S, S)>> {
    const MAX_EXPONENT: i64 = 4096;
    let basis = el.null_basis();
    if basis.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..64 {
        let coeffs: Vec<i64> = basis.iter().map(|_| rng.gen_range(-8..=8)).collect();
        let mut x: Vec<Rational> = vec![Rational::zero(); el.pivots.len()];
        for (b, k) in basis.iter().zip(&coeffs) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += bi * Rational::from_integer((*k).into());
            }
        }
        let lcm = x.iter().fold(BigInt::one(), |l, q| num_integer::Integer::lcm(&l, q.denom()));
        let mut ell: FxHashMap<u32, BigInt> = FxHashMap::default();
        for (&b, &c) in &el.col {
            ell.insert(b, (&x[c as usize] * Rational::from_integer(lcm.clone())).to_integer());
        }
        for (&v, &d) in &el.defining {
            let e = &system.equations[d as usize];
            ell.insert(v, &ell[&e.a] - &ell[&e.u]);
        }
        for sign in [1i64, -1] {
            let vals: Vec<(u32, BigInt)> = ell.iter().map(|(&v, l)| (v, l * sign)).collect();
            let ok = vals.iter().all(|(v, l)| {
                if *v == system.one {
                    l.is_zero()
                } else {
                    l.is_positive() && *l <= BigInt::from(MAX_EXPONENT)
                }
            });
            let distinct = vals.iter().map(|(_, l)| l).collect::<FxHashSet<_>>().len() == vals.len();
            if ok && distinct {
                let two = S::from_int(2);
                let mut out: Vec<(S, S)> = vals
                    .iter()
                    .map(|(v, l)| {
                        let e: u32 = u32::try_from(l).expect("bounded exponent");
                        (idx.value(*v).clone(), S::one() / num_traits::pow(two.clone(), e as usize))
                    })
                    .collect();
                out.push((S::zero(), S::zero()));
                out.sort();
                return Some(out);
            }
        }
    }
    None
}

/// Checks an assignment against every equation and for injectivity.
pub fn assignment_satisfies<S: Scalar>(idx: &ValueIndex<S>, system: &LogLinearSystem, g: &[(S, S)]) -> bool {
    let map: FxHashMap<&S, &S> = g.iter().map(|(v, x)| (v, x)).collect();
    let distinct = g.iter().map(|(_, x)| x).collect::<FxHashSet<_>>().len() == g.len();
    let zero_one = map.get(&S::zero()) == Some(&&S::zero()) && map.get(&S::one()) == Some(&&S::one());
    distinct
        && zero_one
        && system.equations.iter().all(|e| {
            let at = |id: u32| map.get(idx.value(id)).map(|x| (*x).clone());
            match (at(e.c), at(e.u), at(e.a)) {
                (Some(c), Some(u), Some(a)) => c * u == a,
                _ => false,
            }
        })
}
