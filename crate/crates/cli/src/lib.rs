//! Pipeline front end: config handling and the stages behind each
//! subcommand of the `build2vec` binary.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, ErrorKind};
