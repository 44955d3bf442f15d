use std::io;
use std::path::Path;

use thiserror::Error;

/// Command failure, carrying the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// 1 validation failure, 2 input error, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Input(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<mmchan::Error> for CliError {
    fn from(e: mmchan::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
