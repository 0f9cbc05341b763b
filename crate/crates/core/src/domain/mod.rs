//! Finite conditional-belief structures and their exact value tables.

pub mod constructions;
pub mod delta;
pub mod file;
pub mod frac;
mod structure;
pub mod values;

pub use constructions::{build_fine13, build_halpern};
pub use delta::{check_order_preservation, select_delta, OrderPreservation};
pub use file::{parse_structure, serialize_structure};
pub use structure::{BeliefStructure, ConditionalObject, WeightTable};
pub use values::{ValueIndex, ValueKind, ENUMERATION_LIMIT};
