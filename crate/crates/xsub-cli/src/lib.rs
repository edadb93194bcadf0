//! Experiment harness for the xsub attack library: run configuration,
//! per-seed contexts, grid sweeps with CSV/plot emission, and the error
//! classification backing the CLI exit codes.

pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;
pub mod sweep;

pub use config::RunConfig;
pub use error::CliError;
