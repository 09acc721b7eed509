use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot read {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("no feasible observation in the archive")]
    NoFeasible,
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } => 2,
            CliError::Runtime(_) => 3,
            CliError::NoFeasible => 4,
            CliError::Verify(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

impl From<moboga::Error> for CliError {
    fn from(e: moboga::Error) -> Self {
        match e {
            moboga::Error::Config(m) => CliError::Config(m),
            moboga::Error::NoFeasible => CliError::NoFeasible,
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
