use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] weakmeter_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("invalid experiment file {path}: {source}")]
    Spec {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("algebra checks failed: {0}")]
    AlgebraFailed(String),
}

impl CliError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        use weakmeter_core::Error as E;
        match self {
            CliError::AlgebraFailed(_) => 2,
            CliError::Core(E::Truncation { .. } | E::TruncationLeak { .. }) => 3,
            CliError::Core(E::OrthogonalSelection { .. }) => 4,
            CliError::Core(E::NoAcceptedSamples { .. }) => 5,
            _ => 1,
        }
    }
}
