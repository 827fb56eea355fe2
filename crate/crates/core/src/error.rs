use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GwptError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix encountered in {what}")]
    Singular { what: &'static str },

    #[error("matrix is not symmetric positive-definite: {what}")]
    NotSpd { what: &'static str },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{what} exceeds limit ({got} > {limit})")]
    TooLarge { what: &'static str, got: usize, limit: usize },

    #[error("index {index:?} leaves the multi-index set")]
    IndexOverflow { index: Vec<u32> },

    #[error("invariant violated: {name} residual {value:e} exceeds {threshold:e} at t = {t}")]
    InvariantViolation { name: &'static str, value: f64, threshold: f64, t: f64 },

    #[error("time grid mismatch: {0}")]
    TimeGrid(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for GwptError {
    fn from(e: std::io::Error) -> Self {
        GwptError::Io(e.to_string())
    }
}

pub type Result<T, E = GwptError> = std::result::Result<T, E>;
