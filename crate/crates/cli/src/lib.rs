//! Command-line driver for the `nscarleman` laboratory: configuration,
//! experiment orchestration and report emission.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use nscarleman::LabError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lab(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

/// Worker count from `CNSF_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("CNSF_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("CNSF_THREADS must be a positive integer, got '{v}'"))),
        },
    }
}
