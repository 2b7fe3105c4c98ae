use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rank-deficient design; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("perfect separation suspected: {0}")]
    Separation(String),

    #[error("empty result: {0}")]
    Empty(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("diagnostic failure: {0}")]
    Diagnostic(String),

    #[error("insufficient draws: {available} available after burn-in, {required} required")]
    InsufficientDraws { available: usize, required: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Library module the error originates from, for machine-readable error records.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::DimensionMismatch { .. } => "likelihood",
            Error::RankDeficient { .. } | Error::Separation(_) => "propensity",
            Error::Sampler(_) | Error::Diagnostic(_) | Error::InsufficientDraws { .. } => "sampler",
            Error::Empty(_) | Error::Schema(_) | Error::Csv(_) => "io",
            Error::Config(_) | Error::Io { .. } | Error::Json(_) => "cli",
        }
    }

    /// Short stable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::Separation(_) => "separation",
            Error::Empty(_) => "empty_result",
            Error::Sampler(_) => "sampler",
            Error::Diagnostic(_) => "diagnostic",
            Error::InsufficientDraws { .. } => "insufficient_draws",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
