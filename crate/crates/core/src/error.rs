use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::smiles::SmilesError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required column or header is missing or malformed.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Well-formed input whose content is unusable.
    #[error("data error: {0}")]
    Data(String),

    #[error("no records survived cleaning of {0}")]
    EmptyDataset(String),

    #[error("SMILES error: {0}")]
    Smiles(#[from] SmilesError),

    /// Binary container (EMB1, BRG1) is truncated or corrupt.
    #[error("format error: {0}")]
    Format(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("no grouped queries: every target group has fewer than {min_group} members")]
    NoGroupedQueries { min_group: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
