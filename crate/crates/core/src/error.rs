use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("length mismatch: expected {expected} {unit}, found {found}")]
    LengthMismatch {
        expected: usize,
        found: usize,
        unit: &'static str,
    },

    #[error("label byte {value} at offset {offset} is not one of -1, 0, 1")]
    LabelOutOfDomain { offset: usize, value: i8 },

    #[error("non-finite score {value} at offset {offset}")]
    NonFiniteScore { offset: usize, value: f64 },

    #[error("positive score mass {mass} exceeds the limit of {limit}")]
    ScoreMassTooLarge { mass: f64, limit: f64 },

    #[error("cannot aggregate rates: {0}")]
    EmptyAggregate(&'static str),

    #[error("unknown isa `{0}`")]
    UnknownIsa(String),

    /// A structural invariant of a constructed graph or tree did not hold.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that indicate a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
