use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("time grid has no steps")]
    EmptyGrid,
    #[error("step {step} has non-positive length {length}")]
    NonPositiveStep { step: usize, length: f64 },
    #[error("invalid waiting tolerance {0}")]
    InvalidTolerance(f64),
    #[error("session {id}: {reason}")]
    InvalidSession { id: usize, reason: String },
    #[error("scenario probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("scenario probabilities sum to {0}, expected 1")]
    WeightsDoNotSumToOne(f64),
    #[error("sessions are not in (arrival, id) order")]
    UnsortedScenario,
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} must be non-negative")]
    NegativeValue(&'static str),
    #[error("efficiency {0} outside (0, 1]")]
    InvalidEfficiency(f64),
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("variable {0} is not binary")]
    NotBinary(String),
    #[error("variable index {0} is not defined in the model")]
    UnknownVariable(usize),
    #[error("invalid gadget parameter: {0}")]
    InvalidParameter(String),
    #[error("enumeration space of {0} points exceeds the limit")]
    SearchSpaceTooLarge(f64),
    #[error("variable {0} needs a finite domain for enumeration")]
    UnboundedDomain(String),
    #[error("solver backend failure: {0}")]
    Backend(String),
    #[error("LP parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Crate-level error for everything above the model builder.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
