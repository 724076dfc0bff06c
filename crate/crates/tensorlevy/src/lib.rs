//! Batch front-end for `tensorlevy-core`: JSON configs in, CSV tables or JSON
//! reports out.

pub mod commands;
pub mod formats;

pub use commands::{run, Command, DriftChoice, Output, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tensorlevy_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
