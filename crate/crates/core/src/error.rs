// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid interval: (s, e) = ({s}, {e}) needs e - s > 1")]
    InvalidInterval { s: usize, e: usize },

    #[error("snapshot t = {t}: {source}")]
    AtSnapshot {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model violation at t = {t}, nodes ({i}, {j}): inner product {value} outside [0, 1]")]
    ModelViolation {
        t: usize,
        i: usize,
        j: usize,
        value: f64,
    },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the data rather than by the caller's arguments.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Format { .. }
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::Json(_)
            | Error::ModelViolation { .. } => true,
            Error::AtSnapshot { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}
