use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the query engine or harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty query batch")]
    EmptyBatch,
    #[error("index not queryable: {0}")]
    NotQueryable(usize),
    #[error("too many clusters: requested {clusters}, have {samples} samples")]
    TooManyClusters { clusters: usize, samples: usize },
    #[error("rows exceed columns: {rows} > {cols}")]
    RowsExceedColumns { rows: usize, cols: usize },
    #[error("insufficient clusters: need at least {needed}, got {got}")]
    InsufficientClusters { needed: usize, got: usize },
    #[error("no unknown clusters")]
    NoUnknownClusters,
    #[error("no labeled unknown samples")]
    NoLabeledUnknowns,
    #[error("invalid concentration: {0}")]
    InvalidConcentration(f64),
    #[error("domain error: {0} is outside the function domain")]
    Domain(f64),
    #[error("no unknown classes")]
    NoUnknownClasses,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("degenerate scores: fewer than 3 distinct values")]
    DegenerateScores,
    #[error("budget exceeds unlabeled pool: budget {budget}, unlabeled {unlabeled}")]
    BudgetExceedsPool { budget: usize, unlabeled: usize },
    #[error("nothing to train on")]
    NothingToTrain,
    #[error("empty batch")]
    EmptyTrainingBatch,
    #[error("unknown strategy: {0}")]
    UnknownStrategy(String),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    #[error("{path}: bad magic, expected \"E2FM\"")]
    BadMagic { path: PathBuf },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
