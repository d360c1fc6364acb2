use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid input file {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 0 success, 2 config or input error, 3 I/O error, 4 infeasible scenario.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } | CliError::Failed(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Infeasible(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn input(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        CliError::Input {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}

impl From<covert_nav::sim::SimError> for CliError {
    fn from(e: covert_nav::sim::SimError) -> Self {
        match e {
            covert_nav::sim::SimError::Infeasible(reason) => CliError::Infeasible(reason),
            other => CliError::Failed(other.to_string()),
        }
    }
}
