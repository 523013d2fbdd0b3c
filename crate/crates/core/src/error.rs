use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("point cloud carries no features")]
    MissingFeatures,

    #[error("feature dimension mismatch: {source_dim} vs {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },

    #[error("invalid correspondence set: {0}")]
    InvalidCorrespondences(String),

    #[error("weight vector has {found} entries, expected {expected}")]
    WeightLengthMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid weight {value} at position {index}: weights must be finite and in [0, 1]")]
    InvalidWeight { index: usize, value: f64 },

    #[error("oracle weighting requires a ground-truth transform")]
    MissingGroundTruth,

    #[error("every correspondence weight was removed by the prefilter")]
    AllWeightsFiltered,

    #[error("need at least 3 correspondences, found {found}")]
    TooFewCorrespondences { found: usize },

    #[error("degenerate configuration: weighted cross-covariance has rank <= 1")]
    DegenerateConfiguration,

    #[error("gradient is numerically unstable: singular value gap {gap:e} below tolerance")]
    NumericallyUnstableGradient { gap: f64 },

    #[error("degenerate 6D rotation representation")]
    DegenerateRepresentation,

    #[error("matrix is not a rotation")]
    NotARotation,

    #[error("no correspondence survives the prefilter")]
    NoActiveCorrespondences,

    #[error("correspondence set is empty")]
    EmptyCorrespondences,

    #[error("RANSAC found no consensus (best inlier count {best})")]
    NoConsensus { best: usize },

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{location}: {message}")]
    FileFormat {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("{path}: unsupported format: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::FileFormat {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
