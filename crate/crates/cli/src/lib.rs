//! Config-driven experiment runner for the `hsssi` library.

pub mod config;
pub mod experiment;
pub mod report;

use std::path::Path;

use thiserror::Error;

pub use config::{preset, ExperimentConfig, RegimeConfig, PRESETS};
pub use experiment::{run, Check, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn run(e: impl std::fmt::Display) -> Self {
        CliError::Run(e.to_string())
    }

    pub fn violations(v: Vec<hsssi::model::Violation>) -> Self {
        CliError::Config(v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))
    }

    /// Process exit code: every error is a usage or configuration problem.
    pub fn exit_code(&self) -> u8 {
        2
    }
}

/// Exit code of a finished run.
pub fn summary_exit_code(pass: bool) -> u8 {
    if pass {
        0
    } else {
        1
    }
}
