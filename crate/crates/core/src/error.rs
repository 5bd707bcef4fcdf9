use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dyadic value {numerator}/2^{level}")]
    InvalidDyadic { numerator: u64, level: u32 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid generator set: {0}")]
    InvalidGenerator(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("budget exceeded: {what} needs {needed}, limit is {limit}")]
    Budget {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("quadrature level {level} does not resolve the Walsh function (need at least {needed})")]
    InsufficientLevel { level: u32, needed: u32 },

    #[error("derivative of order {order:?} is not available for {function}")]
    UnsupportedOrder { function: String, order: Vec<u32> },

    #[error("{function} has no exact integral oracle")]
    MissingIntegral { function: String },

    #[error("supremum over derivative orders did not stabilize ({at_cap} at cap {cap}, {at_double} at cap {double})")]
    Divergence {
        cap: u32,
        double: u32,
        at_cap: f64,
        at_double: f64,
    },

    #[error("sup norm of piece {piece} could not be certified")]
    Uncertified { piece: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
