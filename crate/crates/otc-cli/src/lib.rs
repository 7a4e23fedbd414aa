//! Library surface of the `otc` command-line tool, exposed so the
//! integration and acceptance suites can drive the commands directly.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Options;
pub use config::{ModelChoice, RunConfig};
pub use error::CliError;
