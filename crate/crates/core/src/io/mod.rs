//! Result persistence and the command drivers behind the `fedmr` binary.

pub mod cache;
pub mod campaign;
pub mod commands;
pub mod manifest;
pub mod table;

pub use commands::{run_command, CliError, CommandOutput};
pub use manifest::RunManifest;
