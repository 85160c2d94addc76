use thiserror::Error;

/// Errors produced by the estimation, simulation and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no features")]
    NoFeatures,

    #[error("more clusters than points ({k} clusters, {n} points)")]
    TooManyClusters { k: usize, n: usize },

    #[error("silhouette undefined for k=1")]
    SingleCluster,

    #[error("invalid proportions: {0}")]
    InvalidProportions(String),

    #[error("missing metric for decision rule: {0}")]
    MissingMetric(&'static str),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
