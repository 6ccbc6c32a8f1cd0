//! Command line companion of `stt-core`: run configuration, file formats,
//! the trajectory-averaging oracle and the benchmark drivers.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod models;
pub mod montecarlo;
pub mod scaling;

pub use config::RunConfig;
pub use error::CliError;
