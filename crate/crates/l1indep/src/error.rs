use thiserror::Error;

/// Errors surfaced by the independence-test pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid block spec: {0}")]
    InvalidSpec(String),

    #[error("row {row}, column {col}: {reason}")]
    BadField { row: usize, col: usize, reason: String },

    #[error("row {row}: expected {expected} fields, found {found}")]
    BadArity { row: usize, expected: usize, found: usize },

    #[error("block index {index} out of range (p = {p})")]
    BlockOutOfRange { index: usize, p: usize },

    #[error("observation index {index} out of range (n = {n})")]
    RowOutOfRange { index: usize, n: usize },

    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },

    #[error("coordinate {coord} is degenerate (zero empirical range)")]
    DegenerateCoordinate { coord: usize },

    #[error("bandwidths too small for criterion: every leave-one-out term was skipped")]
    CriterionAllSkipped,

    #[error("invalid bandwidth: {0}")]
    InvalidBandwidth(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("invalid scenario parameter: {0}")]
    InvalidScenarioParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
