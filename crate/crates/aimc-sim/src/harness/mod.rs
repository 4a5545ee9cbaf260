//! Experiment harness: config parsing, presets, seeded execution, and
//! CSV/JSON outputs.

pub mod config;
pub mod presets;
pub mod runner;

pub use config::{DeviceSpec, ExperimentConfig, OptimizerSpec, ProblemSpec, RunSpec, SweepPoint};
pub use presets::{preset, preset_names};
pub use runner::{run_experiment, run_single, Summary, CSV_HEADER};
