//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, propagation, and the data/benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible dimensions.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A scalar or collection argument is out of its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A class id has no labeled representative, so its probability row
    /// would be structurally zero.
    #[error("class {class} has no labeled representative")]
    UnrepresentedClass { class: usize },

    /// Exhaustive enumeration was requested above its factorial guard.
    #[error("instance size {n} exceeds the exhaustive-search limit {limit}")]
    TooLarge { n: usize, limit: usize },

    /// A binary-only operation received labels outside {0, 1}.
    #[error("labels are not binary (found class {found})")]
    NonBinaryLabels { found: usize },

    /// The labeled fraction leaves no room for a stratified split.
    #[error("labeled fraction {fraction} is infeasible for {n} points in {num_classes} classes")]
    InfeasibleFraction {
        fraction: f64,
        n: usize,
        num_classes: usize,
    },

    /// A cell of an ingested table is missing or fails to parse.
    #[error("bad cell at data row {row}, column `{column}`: {message}")]
    BadCell {
        row: usize,
        column: String,
        message: String,
    },

    /// Dataset-level validation failure (label column, class count, ...).
    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
