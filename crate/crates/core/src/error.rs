use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column {column}: non-binary token {token:?}")]
    NonBinaryToken {
        line: usize,
        column: usize,
        token: String,
    },

    #[error("input has a header but no data rows")]
    EmptyBody,

    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),

    #[error("empty feature name at column {0}")]
    EmptyFeatureName(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("feature {index} differs: {left:?} vs {right:?}")]
    FeatureMismatch {
        index: usize,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("second moment has numerical rank {rank}, fewer than the {k} requested components")]
    RankDeficient { k: usize, rank: usize },

    #[error("symmetric eigendecomposition did not converge")]
    EigenFailure,

    #[error("tensor is not symmetric (max asymmetry {0:e})")]
    NonSymmetricTensor(f64),

    #[error("tensor power method deflation failed at component {component}")]
    DeflationFailure { component: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for failures of the numerical routines rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::RankDeficient { .. }
                | Error::EigenFailure
                | Error::NonSymmetricTensor(_)
                | Error::DeflationFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
