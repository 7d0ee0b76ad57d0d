//! Shared inputs for the benchmarks.

use retrogen_core::corpus::{RetrievalDatabase, Task};
use retrogen_core::pipeline::artifacts::synthetic_database;
use retrogen_core::pipeline::synthetic::{generate_corpus, SyntheticConfig};

/// The near-copy synthetic database for code generation.
pub fn code_database(seed: u64) -> RetrievalDatabase {
    synthetic_database(
        &generate_corpus(&SyntheticConfig::near_copy(seed)),
        Task::CodeGen,
    )
    .unwrap()
}
