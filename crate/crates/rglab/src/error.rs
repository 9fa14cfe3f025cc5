use thiserror::Error;

/// Failure of a CLI invocation, carrying its exit-code class.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command-line usage or an invalid configuration (exit code 2).
    #[error("{0}")]
    Config(String),
    /// Anything that goes wrong after the inputs were accepted (exit code 1).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }

    pub fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O error: {err}"))
    }
}
