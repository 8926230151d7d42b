use std::io;
use std::path::PathBuf;

use scoredenoise_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("frame mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Mismatch(_) => 5,
            _ => 2,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::NonFiniteLoss { .. } => 3,
        CoreError::NonFiniteUpdate { .. } => 4,
        CoreError::Patch { source, .. } => core_exit_code(source),
        _ => 2,
    }
}

/// A syntax error inside a text format, before the file name is known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError { line, message: message.into() }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> CliError {
        CliError::Parse { path: path.into(), line: self.line, message: self.message }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
