use std::path::PathBuf;
use thiserror::Error;
use winding_core::solver::SolverError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
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
    #[error("{path}: malformed CSV at line {line}: {reason}")]
    Csv { path: PathBuf, line: usize, reason: String },
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    /// A check suite ran and did not pass; the payload is the failure report.
    #[error("checks failed")]
    CheckFailed(serde_json::Value),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
