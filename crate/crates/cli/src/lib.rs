//! Configuration and pipeline behind the `lyapctl` binary.

pub mod config;
pub mod pipeline;

pub use config::RunConfig;
pub use pipeline::{run_pipeline, run_simulate, ExitKind, PipelineError, RunSummary, Through};
