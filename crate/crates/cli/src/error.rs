use std::path::Path;

/// A library error tagged with the flag or path it came from.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Lib {
        context: String,
        #[source]
        source: vessaff::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: String, message: String, io: bool },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib { source, .. } if source.is_io() => 2,
            CliError::Config { io: true, .. } => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Context<T> {
    fn flag(self, flag: &str) -> CliResult<T>;
    fn path(self, flag: &str, path: &Path) -> CliResult<T>;
}

impl<T> Context<T> for vessaff::Result<T> {
    fn flag(self, flag: &str) -> CliResult<T> {
        self.map_err(|source| CliError::Lib {
            context: flag.to_string(),
            source,
        })
    }

    fn path(self, flag: &str, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::Lib {
            context: match source {
                // Io errors already carry the path.
                vessaff::Error::Io { .. } => flag.to_string(),
                _ => format!("{flag} {}", path.display()),
            },
            source,
        })
    }
}
