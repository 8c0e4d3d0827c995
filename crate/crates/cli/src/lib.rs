//! Configuration and experiment driver for the `catqcf` binary.

pub mod config;
pub mod run;
pub mod selftest;

pub use config::{parse_config, resolve, ConfigError, Mode, RunConfig};
pub use run::{run, RunError};
