//! Config-driven experiment runner for `zeroflow-core`.

pub mod config;
pub mod expr;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] zeroflow_core::Error),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
