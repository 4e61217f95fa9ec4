use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
///
/// The variants group into input problems (bad files, bad arguments),
/// domain problems (data that parses but cannot be modelled), and numerical
/// failures. [`Error::class`] exposes that grouping for callers that map
/// errors onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: u64, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("alignment error: cycle {cycle} has {found} samples but cycle {reference} has {expected}")]
    Alignment {
        reference: u64,
        expected: usize,
        cycle: u64,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Training { epoch: usize, loss: f64 },

    #[error("search space exhausted: all {0} grid points have been observed")]
    Exhausted(usize),

    #[error("model too large for exact enumeration: {0}")]
    Size(String),

    #[error("not certifiable: {0}")]
    NotCertifiable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error grouping used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Domain,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Format(_)
            | Error::Parse { .. }
            | Error::EmptyInput(_)
            | Error::Alignment { .. }
            | Error::Argument(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Input,
            Error::Domain(_)
            | Error::InsufficientData(_)
            | Error::Exhausted(_)
            | Error::Size(_)
            | Error::NotCertifiable(_) => ErrorClass::Domain,
            Error::Numerical(_) | Error::Training { .. } => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
