use std::path::{Path, PathBuf};

/// Command failure; [`CliError::exit_code`] maps it to the process status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Solver(#[from] follower_core::Error),
    /// The computation ran but a verification did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad input, 3 for numerical or solver failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Solver(follower_core::Error::Input(_)) => 2,
            CliError::Solver(_) | CliError::Failed(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn config(e: follower_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
