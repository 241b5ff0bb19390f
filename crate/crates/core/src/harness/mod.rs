//! Experiment configuration, execution and trace files.

pub mod config;
pub mod diagnostics;
pub mod export;
pub mod runner;
pub mod source;
pub mod sweep;
pub mod trace;
pub mod verify;

pub use config::ExperimentConfig;
pub use diagnostics::{compute_diagnostics, DiagnosticsReport};
pub use export::{export_plot_data, Aggregate};
pub use runner::{execute, run_experiment, run_to_file, RunOutcome};
pub use source::LoadedProblem;
pub use trace::Trace;
