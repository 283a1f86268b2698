use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("instance mask is empty, overlap ratio undefined")]
    DegenerateInstance,

    #[error("every key in the attention row is masked")]
    DegenerateRow,

    #[error("need at least {needed} corresponded points, got {got}")]
    InsufficientOverlap { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("nearest-neighbor query against an empty point set")]
    EmptySet,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure class, used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Geometry,
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::InsufficientOverlap { .. } | Error::DegenerateGeometry(_) => {
                ErrorClass::Geometry
            }
            _ => ErrorClass::Data,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "FormatError",
            Error::Consistency(_) => "ConsistencyError",
            Error::Validation(_) => "ValidationError",
            Error::Config(_) => "ConfigError",
            Error::DegenerateInstance => "DegenerateInstanceError",
            Error::DegenerateRow => "DegenerateRowError",
            Error::InsufficientOverlap { .. } => "InsufficientOverlapError",
            Error::DegenerateGeometry(_) => "DegenerateGeometryError",
            Error::EmptySet => "EmptySetError",
            Error::Io { .. } => "IoError",
        }
    }
}
