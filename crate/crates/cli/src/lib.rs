//! Experiment runner for the bspnn intrusion-detection pipeline: builds the
//! KDD-99 dataset splits, trains and evaluates misuse and anomaly models, and
//! produces detection-rate curves.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;

pub use error::{CliError, CliResult};
