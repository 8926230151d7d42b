//! File formats, configuration and subcommands of the `scoredenoise` tool.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod obj;
pub mod xyz;

pub use commands::{run, Cli};
pub use error::{CliError, Result};
