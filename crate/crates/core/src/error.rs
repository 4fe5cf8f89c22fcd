use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or experiment setting is out of bounds.
    #[error("invalid configuration: {field}: {message}")]
    Config { field: &'static str, message: String },

    /// Two arrays that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A dataset breaks the observed-cell coverage rules.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid mixture spec: {0}")]
    Spec(String),

    #[error("missingness injection failed: {0}")]
    Injection(String),

    /// Every weight feeding a cluster (or a point) vanished.
    #[error("degenerate cluster {cluster}: all weights are zero")]
    DegenerateCluster { cluster: usize },

    #[error("degenerate imputation for point {point}: all weights are zero")]
    DegeneratePoint { point: usize },

    #[error("degenerate validity index: {0}")]
    DegenerateIndex(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            field,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::Spec(_) | Error::UnsupportedSize(_) => ErrorKind::Config,
            Error::InvalidData(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Injection(_)
            | Error::Dimension(_) => ErrorKind::Data,
            Error::DegenerateCluster { .. }
            | Error::DegeneratePoint { .. }
            | Error::DegenerateIndex(_) => ErrorKind::Runtime,
        }
    }
}
