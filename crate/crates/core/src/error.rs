use thiserror::Error;

/// Errors raised by the clustering library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AwtError {
    #[error("empty input")]
    EmptyInput,

    #[error("input contains a non-finite value at index {0}")]
    NonFinite(usize),

    #[error("length {0} is not a power of two; pad the series first")]
    NonDyadicLength(usize),

    #[error("malformed structure: {0}")]
    Structure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("level count {requested} out of range (available: {available})")]
    LevelRange { requested: usize, available: usize },

    #[error("point id {0} was already inserted")]
    DuplicatePoint(usize),

    #[error("tree is empty")]
    EmptyTree,

    #[error("average inter-cluster distance {value} is negative beyond rounding bound {bound}")]
    NegativeDistance { value: f64, bound: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("series has no present samples")]
    AllMissing,

    #[error(
        "station id sets differ (only in first: {only_in_a:?}; only in second: {only_in_b:?})"
    )]
    IdMismatch {
        only_in_a: Vec<String>,
        only_in_b: Vec<String>,
    },
}

pub type Result<T> = std::result::Result<T, AwtError>;
