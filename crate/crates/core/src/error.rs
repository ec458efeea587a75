use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameters, detected before any work starts.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: parse error at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The cache can hold every object that is ever requested.
    #[error("cache unbounded: capacity {capacity} is not below the reachable data volume {volume}")]
    Unbounded { capacity: f64, volume: f64 },

    /// A ratio with a zero denominator.
    #[error("undefined: {0}")]
    Undefined(String),

    /// A broken internal invariant, e.g. a policy naming a non-resident victim.
    #[error("internal consistency failure: {0}")]
    Consistency(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes the message with `ctx`, keeping the variant.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Undefined(m) => Error::Undefined(format!("{ctx}: {m}")),
            Error::Consistency(m) => Error::Consistency(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Consistency(_) => 3,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }
}
