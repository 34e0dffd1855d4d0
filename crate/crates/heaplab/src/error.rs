use thiserror::Error;

/// Errors surfaced by the engine, model layer and I/O.
#[derive(Debug, Error)]
pub enum HeapError {
    /// Input outside the documented domain (bad ordering, empty support, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// State-space truncation did not converge within the doubling limit.
    #[error("truncation failure: {0}")]
    Truncation(String),

    /// A linear solve or transform produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A converged computation missed its accuracy target.
    #[error("accuracy failure: {0}")]
    Accuracy(String),

    /// Malformed input data; `row` is the 1-based data row (excluding header).
    #[error("ingestion error at row {row}, column `{column}`: {msg}")]
    Ingestion {
        row: usize,
        column: String,
        msg: String,
    },

    /// The sampler aborted mid-run; the message names the failing block.
    #[error("sampler failure: {0}")]
    Sampler(String),

    /// Run manifest present in the output directory disagrees with this run.
    #[error("manifest mismatch: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HeapError>;
