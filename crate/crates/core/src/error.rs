use thiserror::Error;

use crate::domain::WeightTable;
use crate::scalar::ParseScalarError;

/// Structural errors: malformed inputs and invariant violations. Check
/// failures are never errors; they are reported as verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("a structure needs at least one world")]
    NoWorlds,
    #[error("{0} worlds exceed the 64-world limit")]
    TooManyWorlds(usize),
    #[error("{worlds} worlds but {base} base and {perturbed} perturbed weights")]
    WeightCount { worlds: usize, base: usize, perturbed: usize },
    #[error("duplicate world label {0:?}")]
    DuplicateWorld(String),
    #[error("unknown world label {0:?}")]
    UnknownWorld(String),
    #[error("missing weight for world {0:?}")]
    MissingWeight(String),
    #[error("{table:?} weight of world {world:?} must be positive")]
    NonPositiveWeight { world: String, table: WeightTable },
    #[error("world {0:?} has a perturbed weight but is outside the trigger set")]
    PerturbationOutsideTrigger(String),
    #[error("trigger set refers to worlds outside the domain")]
    TriggerOutOfRange,
    #[error("base and perturbed weights disagree in total over the trigger set")]
    TriggerMassMismatch,
    #[error("blocks must be nonempty, disjoint, and cover every world")]
    InvalidBlocks,
    #[error("conditioning on the empty set")]
    EmptyConditioning,
    #[error("malformed number for {field}: {source}")]
    MalformedNumber { field: String, source: ParseScalarError },
    #[error("all conditional probabilities coincide; no positive gap exists")]
    DegenerateDomain,
    #[error("perturbation {0} breaks the strict order of conditional probabilities")]
    DeltaTooLarge(String),
    #[error("{worlds} worlds is too many for exhaustive enumeration (limit {limit})")]
    EnumerationTooLarge { worlds: usize, limit: usize },
    #[error("scaled weights need {0} bits; exact tables support at most 254")]
    MagnitudeTooLarge(u64),
    #[error("domain file: {0}")]
    Syntax(String),
    #[error("domain file: {0}")]
    Conflict(String),
}
