use thiserror::Error;

/// Errors raised by estimators, resampling procedures and data ingestion.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("invalid datum: {0}")]
    InvalidDatum(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("cumulative sum diagram is degenerate (fewer than two points or no positive weight)")]
    DegenerateDiagram,

    #[error("invalid bandwidth {0}: must be positive and finite")]
    InvalidBandwidth(f64),

    #[error("every bootstrap replicate has zero variance estimate at t = {t}")]
    DegenerateWindow { t: f64 },

    #[error("singular design at t = {t}: {what}")]
    SingularDesign { t: f64, what: String },

    #[error("subsample size m = {m} must be smaller than the sample size n = {n}")]
    InvalidSubsample { m: usize, n: usize },

    #[error("{flagged} of {total} bootstrap refits found no score zero-crossing")]
    UnstableFit { flagged: usize, total: usize },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("{failed} of {total} simulation runs failed (first error: {first})")]
    ExperimentFailed {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
