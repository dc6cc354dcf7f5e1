//! File formats and subcommands of the `zzarray` command-line tool.
//!
//! The binary is a thin wrapper over [`cli::run`]; tests drive the same
//! entry point in-process.

pub mod cli;
mod commands;
pub mod formats;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
