use thiserror::Error;

/// Errors produced by oracles, the solver and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {value} at coordinate {index} in {context}")]
    NonFinite {
        index: usize,
        value: f64,
        context: &'static str,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation at iteration {iter}: {msg}")]
    ContractViolation { iter: usize, msg: String },

    #[error("stationary denominator at iteration {iter}: subgradient pair has near-zero norm while the target gap is positive")]
    StationaryDenominator { iter: usize },

    #[error("ground-truth LP solve failed: {0}")]
    Lp(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 2 for configuration/parse/i/o
    /// problems, 3 for runtime contract violations. (Exit 1 is reserved for
    /// certificate failures, which are not errors.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::TraceParse { .. } | Error::Io(_) => 2,
            Error::NonFinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::ContractViolation { .. }
            | Error::StationaryDenominator { .. }
            | Error::Lp(_) => 3,
        }
    }
}
