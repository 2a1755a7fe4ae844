use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto exit codes, so every
/// failure mode is classified as argument, data, structure, or numeric.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input, reported with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Caller violated a precondition (bad flag value, vertex out of range,
    /// mixed graphs under phi labeling, ...).
    #[error("argument error: {0}")]
    Argument(String),

    /// Input data is internally inconsistent (bad endpoints, ragged
    /// feature rows, missing files).
    #[error("data error: {0}")]
    Data(String),

    /// A DAG that must be acyclic is not, or layer bookkeeping broke.
    #[error("structure error: {0}")]
    Structure(String),

    /// Tree expansion would exceed the caller's node budget.
    #[error("expansion of {needed} nodes exceeds budget {budget}")]
    Budget { needed: u64, budget: u64 },

    /// Non-finite loss or gradient; no optimizer step was taken.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
