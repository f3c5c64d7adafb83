use thiserror::Error;

/// Errors produced by the rate, channel, encoding, simulation and ingest code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("error probability {q} outside [0, {max}] for k = {k}")]
    Domain { q: f64, k: usize, max: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {what} has d = {found}, expected d = {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("instance too large: C({d}, {k}) = {count} subsets exceeds the cap of {cap}")]
    InstanceTooLarge { d: usize, k: usize, count: u128, cap: u128 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate threshold equation: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("ragged row at line {line}: expected {expected} entries, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("negative count {value} at row {row}, column {column}")]
    NegativeEntry { row: usize, column: usize, value: i64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
