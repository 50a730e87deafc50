//! Experiment configuration, execution and CSV artifacts.

pub mod config;
pub mod experiment;
pub mod io;

pub use config::{ExperimentConfig, Method, Preset, SystemKind};
pub use experiment::{compare_runs, run_experiment, Comparison, SummaryStats};
