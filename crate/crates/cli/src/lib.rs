//! File formats and subcommands for the `debias` binary.

pub mod commands;
pub mod config_file;
pub mod error;
pub mod log_file;
pub mod model_file;
pub mod schema_file;

pub use error::{CliError, Result};
