//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while defining or loading a hyperparameter space.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("parameter `{name}`: {reason}")]
    BadParam { name: String, reason: String },
    #[error("space file {path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error("space has no parameters")]
    Empty,
}

/// Errors raised while ingesting or splitting monthly series data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path} row {row}: {reason}")]
    BadRow { path: String, row: usize, reason: String },
    #[error("series `{series}` too short: {reason}")]
    TooShort { series: String, reason: String },
    #[error("unknown target `{0}` (expected one of: commits, closed_prs, closed_issues)")]
    UnknownTarget(String),
}

/// Errors raised while training or applying the forest learner.
#[derive(Debug, Error)]
pub enum LearnError {
    #[error("cannot fit on empty data")]
    EmptyData,
    #[error("poisson criterion requires non-negative targets (got {0})")]
    NegativeTarget(f64),
    #[error("predict called with {got} features, model trained on {expected}")]
    ArityMismatch { got: usize, expected: usize },
}

/// Errors raised while evaluating candidates.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("evaluation of candidate {candidate}: {reason}")]
    Failed { candidate: u64, reason: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cache file {path}: {reason}")]
    Cache { path: String, reason: String },
}

/// Errors raised by the statistical ranking machinery.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("treatment table needs at least 2 treatments and 2 blocks (got {treatments}x{blocks})")]
    Degenerate { treatments: usize, blocks: usize },
    #[error("ragged treatment table: treatment {treatment} has {got} blocks, expected {expected}")]
    Ragged {
        treatment: usize,
        got: usize,
        expected: usize,
    },
    #[error("no critical-distance constant for k = {0} (table covers 2..=20)")]
    UnsupportedK(usize),
}
