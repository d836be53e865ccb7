//! Command-line front end for the pmsfwm simulation: configuration loading,
//! overrides, and the CSV-producing subcommands.

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
