use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric failure in {what}: best residual {residual:e}")]
    NumericFailure { what: &'static str, residual: f64 },
    #[error("resource limit: {what} needs {requested} members, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: f64,
        cap: usize,
    },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("format error at row {row}: {msg}")]
    Format { row: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
