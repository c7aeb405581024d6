use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Missing { path: PathBuf, source: io::Error },

    #[error("{}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        source: joint_cws::Error,
    },

    #[error("{context}: {source}")]
    Invalid {
        context: String,
        source: joint_cws::Error,
    },

    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] joint_cws::Error),
}

impl CliError {
    /// 2 for unreadable inputs, 3 for inputs that fail validation, 1 for
    /// anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Missing { .. } | CliError::Checkpoint { .. } => 2,
            CliError::Invalid { .. } | CliError::Config(_) => 3,
            CliError::Write { .. } | CliError::Core(_) => 1,
        }
    }

    pub fn invalid(path: &Path, source: joint_cws::Error) -> Self {
        CliError::Invalid {
            context: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
