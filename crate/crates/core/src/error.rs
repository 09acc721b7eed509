use thiserror::Error;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error for `{name}`: {message}")]
    Validation { name: String, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("evaluation of constraint `{name}` failed: {message}")]
    Constraint { name: String, message: String },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no feasible observation in the archive")]
    NoFeasible,

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(name: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            name: name.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
