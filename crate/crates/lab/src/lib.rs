//! Experiment runner for the grid BLPP library: configuration, seeded replica
//! fan-out, CSV output and the command line.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;

mod error;
mod runner;

pub use config::Config;
pub use error::{LabError, Result};
pub use experiments::{Check, Outcome, Table};
pub use runner::{execute, run, RunSummary};
