//! Command implementations behind the `phfsi` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod workspace;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use workspace::Workspace;
