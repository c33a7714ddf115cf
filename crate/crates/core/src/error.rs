use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FgmError>;

/// Errors raised by the library.
///
/// The variants map onto distinct failure classes so that a front end can
/// pick an exit status without inspecting messages.
#[derive(Debug, Error)]
pub enum FgmError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid label {label:?} at line {line}")]
    Label { line: usize, label: String },

    #[error("invalid group structure: {0}")]
    Structure(String),

    #[error("invalid tree structure: {0}")]
    Tree(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl FgmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FgmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        FgmError::Argument(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        FgmError::Contract(msg.into())
    }

    /// True for errors caused by malformed input files.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            FgmError::Io { .. }
                | FgmError::Parse { .. }
                | FgmError::Label { .. }
                | FgmError::Structure(_)
                | FgmError::Tree(_)
                | FgmError::Serde(_)
        )
    }
}
