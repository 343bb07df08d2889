use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite numeric input in {context}")]
    NonFiniteInput { context: &'static str },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("numeric abort at step {step}: {reason}")]
    NumericAbort { step: usize, reason: String },

    #[error("newton solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no integer k satisfies 1 < k*a < 2 (a = {a:e})")]
    InfeasibleConstant { a: f64 },

    #[error("insufficient data: need at least {needed} replicates, got {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("csv parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
