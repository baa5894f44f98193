use std::fmt::Display;
use std::path::Path;

/// Failure of a subcommand, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, flags or input file contents. Exit status 2.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    /// Anything that goes wrong after validation. Exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Display) -> Self {
        Self::Validation { field: field.into(), message: message.to_string() }
    }

    pub fn runtime(context: impl Display, err: impl Display) -> Self {
        Self::Runtime(format!("{context}: {err}"))
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::runtime(path.display(), err)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 2,
            Self::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
