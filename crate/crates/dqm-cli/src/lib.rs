//! Driver behind the `dqm` binary: argument parsing, report writing and the
//! `verify-all` suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod suite;

pub use commands::{run, Outcome};
pub use config::{Cli, RunConfig};
pub use error::CliError;
