use thiserror::Error;

#[derive(Debug, Error)]
pub enum QotError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{function} undefined at eigenvalue {eigenvalue}")]
    Domain { function: String, eigenvalue: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("regularizer '{name}' lacks capability: {missing}; mollify it first")]
    Capability { name: String, missing: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("maximizer reached the search bound {bound}; enlarge it")]
    BoundTooSmall { bound: f64 },
}

pub type Result<T, E = QotError> = std::result::Result<T, E>;
