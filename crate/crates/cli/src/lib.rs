//! Command-line front end for the covert navigation pipeline.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::CliError;
