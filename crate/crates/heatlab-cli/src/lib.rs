//! Library surface of the experiment runner: config parsing, the experiment
//! implementations and bundle emission, shared by the binary and the
//! acceptance suite.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run_experiment, RunError};
pub use report::{ReportFormat, ResultBundle};
