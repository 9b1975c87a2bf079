//! Robustness checking for programs running on store-atomic relaxed memory
//! with per-address and all-addresses store buffers.

pub mod instrument;
pub mod oracle;
pub mod screach;
pub mod semantics;
pub mod syntax;
pub mod traces;
