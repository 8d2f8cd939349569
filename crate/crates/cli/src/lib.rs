//! File formats, configuration, the oracle suite and the command line
//! front end for `rm-dpg`.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod meshio;
pub mod plotdata;
pub mod pool;
pub mod verify;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("{0}")]
    Numerical(rm_dpg::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 1 for numerical failures, 2 for usage and configuration errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(rm_dpg::Error::Config(_)) => 2,
            CliError::Numerical(_) | CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } | CliError::Format(_) => 2,
        }
    }
}

impl From<rm_dpg::Error> for CliError {
    fn from(e: rm_dpg::Error) -> Self {
        CliError::Numerical(e)
    }
}
