use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("generator would produce {requested} elements, above the cap of {cap}")]
    SizeCapExceeded { requested: u128, cap: usize },

    #[error("not a lower set: {0}")]
    NotLowerSet(String),

    #[error("duplicate points at indices {first} and {second}")]
    DuplicatePoints { first: usize, second: usize },

    #[error("relabeling error: {0}")]
    Relabeling(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("unsupported derivative: {0}")]
    UnsupportedDerivative(String),

    #[error(
        "matrix is rank deficient (rank {rank} of {expected}); use the error-subspace analysis"
    )]
    RankDeficient { rank: usize, expected: usize },

    #[error("target is not determined by the sensors: {0}")]
    Undetermined(String),

    #[error("solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    ExcessiveResidual { residual: f64, tolerance: f64 },

    #[error("weight matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn scenario(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            path: path.into(),
            message: message.into(),
        }
    }
}
