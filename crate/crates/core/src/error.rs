use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: invalid `{field}`: {message}")]
    Validation {
        row: usize,
        field: &'static str,
        message: String,
    },

    #[error("invalid configuration: `{field}` {message}")]
    Config { field: &'static str, message: String },

    #[error("duplicate date {date} at row {row}")]
    DuplicateDate { row: usize, date: String },

    #[error("{0}: no data")]
    Empty(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient history: need at least {needed} records, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("collapsed grid: stock bid equals stock ask ({0})")]
    CollapsedGrid(f64),

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("day {day}: {source}")]
    Day {
        day: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Divergence { epoch: usize },

    #[error("enumeration of {days} days exceeds the limit of {limit}; use the closed form")]
    TooLarge { days: usize, limit: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of an iterative numerical method rather than of the
    /// inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::Divergence { .. } => true,
            Error::Day { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
