use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solution diverged at t = {time}: max |u| = {max_abs}")]
    Divergence { time: f64, max_abs: f64 },

    #[error("ensemble member {member} diverged at t = {time}: max |u| = {max_abs}")]
    MemberDiverged { member: usize, time: f64, max_abs: f64 },

    #[error("window [-{half_width}, {half_width}] leaves less than {margin} of margin inside the domain")]
    WindowOutOfDomain { half_width: f64, margin: f64 },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("outside function class: {0}")]
    OutsideClass(String),

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("interface error: {0}")]
    Interface(String),
}

pub type Result<T> = std::result::Result<T, Error>;
