//! IO, configuration and parallel drivers for the bid stack engine.
//!
//! The binary `bidstack` wraps [`commands`]; [`parallel`] holds the rayon
//! Monte Carlo and sweep drivers that reproduce the serial core results bit for bit.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod parallel;

pub use commands::{Output, RunOptions};
pub use config::RunConfig;
pub use error::CliError;
