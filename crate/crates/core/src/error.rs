use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GelatoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GelatoError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("conflicting weights for edge ({u}, {v}): {first} vs {second}")]
    Conflict {
        u: usize,
        v: usize,
        first: f64,
        second: f64,
    },
    #[error("duplicate edge ({u}, {v}) at line {line}")]
    Duplicate { u: usize, v: usize, line: usize },
    #[error("node {node} out of range for {n} nodes")]
    Range { node: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },
    #[error("attributes are required for {0}")]
    AttributeRequired(&'static str),
    #[error("undefined: {0}")]
    Undefined(&'static str),
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GelatoError {
    pub fn param(msg: impl Into<String>) -> Self {
        GelatoError::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GelatoError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the command line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            GelatoError::Parse { .. } => "parse",
            GelatoError::Conflict { .. } => "conflict",
            GelatoError::Duplicate { .. } => "duplicate",
            GelatoError::Range { .. } => "range",
            GelatoError::Dimension { .. } => "dimension",
            GelatoError::Parameter(_) => "parameter",
            GelatoError::ZeroDegree { .. } => "degree",
            GelatoError::AttributeRequired(_) => "attribute-required",
            GelatoError::Undefined(_) => "undefined",
            GelatoError::Config(_) => "config",
            GelatoError::Io { .. } => "io",
        }
    }
}
