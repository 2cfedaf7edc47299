use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last increment {residual:e}, tolerance {tol:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("linear algebra backend failure: {0}")]
    Linalg(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            expected: expected.into(),
            got: got.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Format(_) => 4,
            Error::NonConvergence { .. } | Error::Internal(_) | Error::Linalg(_) => 3,
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidArgument(_)
            | Error::Shape { .. }
            | Error::Domain(_) => 2,
        }
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
