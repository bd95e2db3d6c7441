use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    /// Dimension mismatch at a named pipeline stage.
    #[error("{stage}: {detail}")]
    Dim { stage: &'static str, detail: String },
    #[error("config key `{key}`: {detail}")]
    Config { key: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Corrupt, truncated or wrong-version file.
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("data: {0}")]
    Data(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn dim(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Dim {
            stage,
            detail: detail.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config { .. } => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}
