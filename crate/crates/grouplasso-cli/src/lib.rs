//! Library side of the command-line tool: file formats, run configurations
//! and the experiment/benchmark harnesses. The binary in `main.rs` is a
//! thin argument-parsing layer over these.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use error::{CliError, CliResult};
