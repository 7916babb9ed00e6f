use std::io;

use thiserror::Error;

/// Errors produced while loading, validating or evaluating vote data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing header: {0}")]
    MissingHeader(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid label {value:?} on line {line}: labels must be 0 or 1")]
    InvalidLabel { line: usize, value: String },

    #[error("non-finite feature in column {column:?} on line {line}")]
    NonFiniteFeature { line: usize, column: String },

    #[error("count exceeds m on line {line}: {count} > {m}")]
    CountExceedsM { line: usize, count: u64, m: u32 },

    #[error("inconsistent row width on line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },

    #[error("non-binary vote {value} at row {row}, column {column}")]
    NonBinaryVote { row: usize, column: usize, value: u8 },

    #[error("labels contain a single class ({0} points); both classes are required")]
    SingleClass(usize),

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: model expects {expected} features, data has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("incompatible curves: {0}")]
    Incompatible(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
