use std::fmt;
use std::path::Path;

/// A failure carrying the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flag values (2).
    Usage(String),
    /// Files that cannot be read or written (3).
    Io(String),
    /// Inputs with wrong dimensions or labels (4).
    Data(String),
    /// Model files that do not decode (5).
    Model(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
            CliError::Model(_) => 5,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) | CliError::Model(m) => {
                f.write_str(m)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
