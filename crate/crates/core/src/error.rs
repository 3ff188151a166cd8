use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("input error: {0}")]
    Input(String),

    #[error("modulus error: {0}")]
    Modulus(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("solver error: {reason} (residual {residual:e} after {iterations} iterations)")]
    Solver {
        reason: String,
        residual: f64,
        iterations: u64,
    },

    #[error("rate value overflows u64: {0}")]
    Overflow(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn modulus(msg: impl Into<String>) -> Self {
        Error::Modulus(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
