use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("truncated file {path}: expected {expected} bytes, found {actual}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("bundle invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("segment {segment}: {reason}")]
    Segment { segment: String, reason: String },

    #[error("missing coverage: {0}")]
    Coverage(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("too few samples: {0}")]
    TooFew(String),

    #[error(
        "pooled covariance is singular (gamma = {gamma}); use a shrinkage gamma > 0, e.g. --gamma 1e-3"
    )]
    SingularCovariance { gamma: f64 },

    #[error("cross-validation fold leak: {0}")]
    FoldLeak(String),

    #[error("stage {stage} failed at {artifact}: {source}")]
    Stage {
        stage: String,
        artifact: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for problems with inputs or parameters, as opposed to failures
    /// while computing.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Format { .. }
            | Error::Truncated { .. }
            | Error::Invariant(_)
            | Error::Config(_) => true,
            Error::Stage { stage, source, .. } => stage == "validate" || source.is_validation(),
            _ => false,
        }
    }

    pub fn at_stage(self, stage: &str, artifact: impl Into<PathBuf>) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                artifact: artifact.into(),
                source: Box::new(other),
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
