use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: row width {found} does not match header width {expected}")]
    RowWidth { line: usize, expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid header: {0}")]
    Header(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature {index} is {found}, expected {expected}")]
    FeatureKind {
        index: usize,
        expected: &'static str,
        found: &'static str,
    },

    #[error("discretization map does not match dataset schema")]
    MetaMismatch,

    #[error("category {value} out of range for feature {feature} (arity {arity})")]
    CategoryOutOfRange { feature: usize, value: f64, arity: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("perfect separation detected: {0}")]
    Separation(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("selection equation is unidentified: {0}")]
    Unidentified(String),

    #[error("target unlabeled fraction {target} unachievable (closest {achieved})")]
    MarUnachievable { target: f64, achieved: f64 },

    #[error("single-class labels: AUC undefined")]
    SingleClass,

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
