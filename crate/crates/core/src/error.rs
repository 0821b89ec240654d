use thiserror::Error;

/// Errors raised by lattice construction and operator evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsError {
    #[error("lattice times must strictly increase: t[{index}] = {current} does not exceed t[{prev_index}] = {previous}")]
    Ordering {
        prev_index: usize,
        index: usize,
        previous: f64,
        current: f64,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("operands live on different lattices")]
    LatticeMismatch,
    #[error("point index {index} out of range for a lattice of {len} points")]
    InvalidPoint { index: usize, len: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("order {order} exceeds the chain cap {cap}")]
    CapExceeded { order: usize, cap: usize },
    #[error("operation requires scalar multiplicity spaces (all mult_dim = 1)")]
    ScalarContract,
    #[error("invalid weight function: {0}")]
    Weight(String),
    #[error("invalid chain table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, QsError>;
