//! Command-line harness for QCNN resource reports, training runs and noise
//! sweeps. The binary in `main.rs` only parses flags and maps errors to exit
//! codes.

pub mod config;
pub mod error;
pub mod experiment;
pub mod resources;

pub use error::{CliError, CliResult};
