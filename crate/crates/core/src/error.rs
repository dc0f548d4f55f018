use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("duplicate triple at {path}:{line}: {triple}")]
    DuplicateTriple {
        path: String,
        line: usize,
        triple: String,
    },

    #[error("unknown {kind} '{name}' at {path}:{line}")]
    Unknown {
        kind: &'static str,
        name: String,
        path: String,
        line: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("center {center}: {source}")]
    Center {
        center: usize,
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

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numeric(_) => 4,
            Error::Center { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateTriple { .. } => "duplicate",
            Error::Unknown { .. } => "unknown",
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::Center { source, .. } => source.kind(),
        }
    }
}
