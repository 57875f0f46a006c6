use thiserror::Error;

/// Errors raised by the reconstruction pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("vectors belong to different discretization spaces")]
    SpaceMismatch,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e}, allowed {allowed:.3e})")]
    NotSymmetric { asymmetry: f64, allowed: f64 },

    #[error("Cholesky factorization failed: matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite integrand value {value} at x = {point:?}")]
    Quadrature { point: Vec<f64>, value: f64 },

    #[error("point {point:?} lies outside the unit domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error("requested {requested} spectrum modes but only {available} are available")]
    SpectrumExhausted { requested: usize, available: usize },

    #[error("missing spectral functional: {0}")]
    MissingFunctional(String),

    #[error("config error in field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}

impl Error {
    /// Process exit status: 1 for configuration/input problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotSymmetric { .. } | Error::NotPositiveDefinite | Error::Quadrature { .. } => 3,
            _ => 1,
        }
    }
}
