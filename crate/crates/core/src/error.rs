use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("{name} = {value} is outside its domain: {bound}")]
    Domain {
        name: &'static str,
        value: String,
        bound: &'static str,
    },
    #[error("index {index} out of range {lo}..={hi}")]
    Index { index: usize, lo: usize, hi: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: impl ToString, bound: &'static str) -> Self {
        Error::Domain {
            name,
            value: value.to_string(),
            bound,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
