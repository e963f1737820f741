use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("scheme {scheme} unsupported: {reason}")]
    SchemeUnsupported {
        scheme: &'static str,
        reason: String,
    },
    #[error("singular jump at t = {time}: 1 + a'(X-)dY vanishes")]
    SingularJump { time: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no reference value available for E[F(X)]")]
    MissingReference,
    #[error("rescaled precision {0} is not in (0, 1)")]
    PrecisionOutOfRange(f64),
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
