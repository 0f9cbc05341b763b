//! Decomposability checks and the partial combination function.

pub mod assoc;
pub mod axioms;
pub mod closure;
pub mod extend;
pub mod monotone;
pub mod pairs;
pub mod triples;

pub use assoc::{find_witnesses, AssociativityWitness};
pub use closure::{check_closure, close_keys, closed_domain, ClosureReport};
pub use extend::{ExtensionReport, TotalCombination};
pub use monotone::{check_clause, Clause, ClauseResult, Keyed};
pub use pairs::{ChainWitness, PairConflict, PairEntry, PairTable};
pub use triples::{enumerate_constrained, is_constrained_triple, sweep_constrained, Chain4, TripleSweep};

/// Monotonicity clauses (weak, strict in the first argument, strict in the
/// second) on the table's own keys.
pub fn check_monotone(table: &PairTable, n_values: usize) -> Vec<ClauseResult> {
    let keys = closure::keyed(table);
    Clause::CHAIN.iter().map(|&c| check_clause(&keys, n_values, c)).collect()
}
