use std::path::PathBuf;

/// Error type shared across the crate.
///
/// Variants are grouped by how the CLI maps them to exit codes:
/// configuration and validation problems (`InvalidInput`, `Config`),
/// runtime failures (`Io`, `Parse`), and integrity failures
/// (`Integrity`). `EmptyNeighborhood` is a typed signal rather than a
/// hard failure; strategies catch it and fall back to a no-op.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An epsilon-ball neighborhood query matched no reference entry.
    #[error("empty neighborhood: no reference entry within epsilon {epsilon}")]
    EmptyNeighborhood { epsilon: f64 },

    /// All candidate distances were zero, so no bandwidth can be derived.
    #[error("degenerate distances: no strictly positive distance available")]
    DegenerateDistances,

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
