//! Experiment runner and acceptance checks for `convlab-core`.
//!
//! [`experiments`] runs the built-in two-regime experiments and writes
//! CSV output with a JSON sidecar; [`checks`] runs the acceptance criteria
//! and reports observed against expected values.

// `!(v >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod checks;
pub mod config;
pub mod experiments;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] convlab_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// True for errors caused by user input rather than by a computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CliError::Config(_)
                | CliError::Core(convlab_core::Error::Config(_))
                | CliError::Core(convlab_core::Error::InvalidParams { .. })
        )
    }
}
