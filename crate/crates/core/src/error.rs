use thiserror::Error;

/// Errors surfaced by configuration, model evaluation and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid SDP problem: {0}")]
    InvalidProblem(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("brute-force oracle limited to M <= {max}, got {got}")]
    OracleTooLarge { max: usize, got: usize },

    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
