use memrobust::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] memrobust::Error),

    #[error("{0}")]
    Usage(String),

    #[error("campaign state {0} is locked by another process")]
    Locked(String),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error("certificate verification found {0} counterexample(s)")]
    Counterexample(usize),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for input problems, 3 for domain errors, 4 for numerical failures
    /// and failed verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Domain => 3,
                ErrorClass::Numerical => 4,
            },
            CliError::Usage(_) | CliError::Locked(_) | CliError::File { .. } | CliError::Csv(_) | CliError::Json(_) => {
                2
            }
            CliError::Counterexample(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
