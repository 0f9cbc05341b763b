//! Associativity failures of the partial combination function.

use rayon::prelude::*;
use serde::Serialize;

use crate::cox::pairs::{ChainWitness, PairTable};

/// `F(x, F(y, z)) ≠ F(F(x, y), z)` with all four lookups defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AssociativityWitness {
    pub x: u32,
    pub y: u32,
    pub z: u32,
    /// `F(y, z)`.
    pub yz: u32,
    /// `F(x, y)`.
    pub xy: u32,
    /// `F(x, F(y, z))`.
    pub lhs: u32,
    /// `F(F(x, y), z)`.
    pub rhs: u32,
    /// Chains behind the lookups `(y,z)`, `(x,yz)`, `(x,y)`, `(xy,z)`.
    pub chains: [ChainWitness; 4],
}

/// For each second coordinate `y`, the first coordinates `x` with `(x, y)`
/// a key, ascending.
fn by_second(table: &PairTable, n_values: usize, skip: impl Fn(u32) -> bool) -> Vec<Vec<u32>> {
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n_values];
    for (x, y, _) in table.iter() {
        if !skip(x) {
            cols[y as usize].push(x);
        }
    }
    cols.par_iter_mut().for_each(|c| c.sort_unstable());
    cols
}

fn witness_at(table: &PairTable, x: u32, y: u32, z: u32) -> Option<AssociativityWitness> {
    let e_yz = table.entry(y, z)?;
    let e_xyz = table.entry(x, e_yz.w)?;
    let e_xy = table.entry(x, y)?;
    let e_rhs = table.entry(e_xy.w, z)?;
    (e_xyz.w != e_rhs.w).then(|| AssociativityWitness {
        x,
        y,
        z,
        yz: e_yz.w,
        xy: e_xy.w,
        lhs: e_xyz.w,
        rhs: e_rhs.w,
        chains: [e_yz.witness(), e_xyz.witness(), e_xy.witness(), e_rhs.witness()],
    })
}

/// All witnesses, sorted by `(x, y, z)`.
///
/// Triples with a coordinate equal to 0 or 1 are skipped: every chain gives
/// `F(0, y) = 0`, `F(1, y) = y` and `F(x, 1) = x`, which makes both sides
/// agree whenever they are defined. [`find_witnesses_unreduced`] checks this
/// on small tables.
pub fn find_witnesses(table: &PairTable, n_values: usize) -> Vec<AssociativityWitness> {
    let one = (n_values - 1) as u32;
    let trivial = |v: u32| v == 0 || v == one;
    search(table, n_values, trivial)
}

/// Same search without the 0/1 reduction.
pub fn find_witnesses_unreduced(table: &PairTable, n_values: usize) -> Vec<AssociativityWitness> {
    search(table, n_values, |_| false)
}

fn search(table: &PairTable, n_values: usize, skip: impl Fn(u32) -> bool + Sync) -> Vec<AssociativityWitness> {
    let cols = by_second(table, n_values, &skip);
    let keys: Vec<(u32, u32)> =
        table.iter().filter(|(y, z, _)| !skip(*y) && !skip(*z)).map(|(y, z, _)| (y, z)).collect();
    let mut found: Vec<AssociativityWitness> = keys
        .par_iter()
        .flat_map_iter(|&(y, z)| cols[y as usize].iter().filter_map(move |&x| witness_at(table, x, y, z)))
        .collect();
    found.sort_unstable_by_key(|w| (w.x, w.y, w.z));
    found
}

/// Checks one triple; `None` when some lookup is undefined or both sides agree.
pub fn check_triple(table: &PairTable, x: u32, y: u32, z: u32) -> Option<AssociativityWitness> {
    witness_at(table, x, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::constructions::small_perturbed;
    use crate::domain::{ValueIndex, ValueKind};

    #[test]
    fn reduction_loses_nothing_on_small_structures() {
        let s = small_perturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        assert_eq!(find_witnesses(&t, idx.len()), find_witnesses_unreduced(&t, idx.len()));
    }

    #[test]
    fn probability_tables_have_no_witnesses() {
        let s = small_perturbed().unperturbed();
        let idx = ValueIndex::build(&s, ValueKind::Belief).unwrap();
        let t = PairTable::build(&idx, s.trigger()).unwrap();
        assert!(find_witnesses_unreduced(&t, idx.len()).is_empty());
    }
}
