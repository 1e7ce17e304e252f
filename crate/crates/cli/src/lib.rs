//! Command-line driver for the `mplc` toolkit: configuration files, design
//! runs, fidelity maps and their heatmaps, geometry tables, perturbation
//! studies and knife-edge scans.

pub mod commands;
pub mod config;
pub mod heatmap;
pub mod map;

use std::path::PathBuf;

pub use config::{ConfigError, RunConfig};
pub use map::{FidelityMap, MapMode};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("output in {path} was written with config hash {found}, this run has {expected}")]
    HashMismatch { path: PathBuf, expected: String, found: String },
    #[error(transparent)]
    Compute(#[from] mplc::Error),
    #[error("{0}")]
    Failed(String),
    #[error("{failed} of {total} map cells failed")]
    PartialMap { failed: usize, total: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input { .. } | CliError::HashMismatch { .. } => 2,
            CliError::PartialMap { .. } => 4,
            CliError::Compute(_) | CliError::Failed(_) | CliError::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

/// Reads and parses a config file; `None` gives the reference config.
pub fn load_config(path: Option<&std::path::Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input { path: p.into(), message: e.to_string() })?;
            RunConfig::parse(&text).map_err(|e| CliError::Input { path: p.into(), message: e.to_string() })
        }
    }
}
