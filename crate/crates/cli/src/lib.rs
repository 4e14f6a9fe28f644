//! Configuration, run orchestration and plot output for the `vortexloc` binary.

pub mod config;
pub mod experiment;
pub mod plot;

pub use config::{ConfigError, ExperimentConfig, Scenario};
pub use experiment::{run_experiment, RunError, RunManifest, RunStatus, Stage};
pub use plot::{emit_plot_data, PlotError};
