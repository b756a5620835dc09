//! Experiment orchestration for `relaynet`: TOML experiment files, BER
//! sweeps, median studies and transfer-function dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, NetworkConfig, OptimizerChoice};
pub use error::{CliError, Result};
