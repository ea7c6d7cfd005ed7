use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule shape: {0}")]
    ScheduleShape(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-contractive step: eta = {eta} exceeds 2/beta = {limit}")]
    NonContractiveStep { eta: f64, limit: f64 },
    #[error("not strongly convex: {0}")]
    NotStronglyConvex(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certification refused: {0}")]
    CertificationRefused(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("generator: {0}")]
    Generator(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
