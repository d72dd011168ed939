use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("index {index} at position {position} is outside the domain [0, {domain})")]
    OutOfDomain {
        position: usize,
        index: u64,
        domain: u64,
    },

    #[error("hash family has range {0}, sign evaluation needs range 2")]
    WrongRange(u64),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("spread dimension {spread} exceeds the field modulus {modulus}")]
    DomainOverflow { spread: u128, modulus: u64 },

    #[error("dimension {dim} exceeds the materialization limit {limit}")]
    Capacity { dim: usize, limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
