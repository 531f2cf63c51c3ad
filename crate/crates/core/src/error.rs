use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is indefinite (smallest eigenvalue {0:e})")]
    IndefiniteMatrix(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("insufficient data: {rows} regression rows for {cols} parameters")]
    InsufficientData { rows: usize, cols: usize },
    #[error("information matrix is singular (eigenvalue ratio {0:e})")]
    SingularInformation(f64),
    #[error("initial state violates constraint {j} (lhs {lhs}, rhs {rhs})")]
    InfeasibleInitialState { j: usize, lhs: f64, rhs: f64 },
    #[error("delta {delta} must exceed p = {p} and be below 1")]
    DeltaTooSmall { delta: f64, p: f64 },
    #[error("solver finished with status {0}")]
    Solver(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn ensure_dims(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(what()))
    }
}
