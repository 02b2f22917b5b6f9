//! Error type shared by every pipeline stage.
//!
//! Variants are grouped by failure class rather than by module so that the
//! CLI can emit a single machine-parseable line (`error: <class>: <detail>`)
//! for any stage.

use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or mathematical precondition was violated
    /// (negative flat height, non-finite sample, segment too short).
    #[error("domain: {0}")]
    Domain(String),

    /// A configuration value is out of range or inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// Matrix or vector dimensions do not line up.
    #[error("shape: {0}")]
    Shape(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A structured text artifact (CSV, model file) is malformed.
    /// `line` is 1-based and includes any header row.
    #[error("parse: {file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    /// Model training or deserialization failed.
    #[error("model: {0}")]
    Model(String),

    /// A persisted model declares a format version this build cannot read.
    #[error("model version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
}

impl Error {
    /// Wraps an I/O error with the path that produced it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
