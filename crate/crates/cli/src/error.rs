use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{0}")]
    NegativeEntry(privhyp::Error),

    #[error("solver failed: {0}")]
    Solver(privhyp::Error),

    #[error("verification failed: {failed} of {total} checks")]
    VerifyFailed { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 validation, 3 negative mechanism entry, 4 solver failure,
    /// 5 failed verification, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Json { .. } => 2,
            CliError::NegativeEntry(_) => 3,
            CliError::Solver(_) => 4,
            CliError::VerifyFailed { .. } => 5,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}

impl From<privhyp::Error> for CliError {
    fn from(e: privhyp::Error) -> Self {
        use privhyp::Error as E;
        match e {
            E::NegativeEntry { .. } => CliError::NegativeEntry(e),
            E::NoConvergence { .. } | E::NumericalFailure(_) => CliError::Solver(e),
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
