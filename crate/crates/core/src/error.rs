use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// An iterative routine failed or produced a non-finite value.
    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    /// The structure matrix is too close to singular for the eigenvalue bound.
    #[error("rank-deficient structure matrix: lambda_min = {lambda_min:e} <= tolerance {tol:e}")]
    RankDeficient { lambda_min: f64, tol: f64 },

    /// A malformed IDX file.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    /// An invalid run configuration; `path` names the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
