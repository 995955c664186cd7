//! Run configuration and subcommand implementations behind the `stmh` binary.

pub mod commands;
pub mod config;

pub use config::RunConfig;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or incompatible inputs; exit code 2.
    #[error("invalid configuration: {0}")]
    Validation(String),
    /// Failure while running; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<stmh::Error> for CliError {
    fn from(e: stmh::Error) -> Self {
        match e {
            stmh::Error::Config(_) | stmh::Error::Dimension { .. } => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Picks a preset or a config file (the preset `n4` when neither is given)
/// and applies the command-line overrides.
pub fn resolve_config(
    config: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<RunConfig, CliError> {
    let mut cfg = match (config, preset) {
        (Some(_), Some(_)) => return Err(CliError::Validation("--config and --preset are mutually exclusive".into())),
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::preset("n4")?,
    };
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(dir) = out {
        cfg.output.directory = dir;
    }
    cfg.validate()?;
    Ok(cfg)
}
