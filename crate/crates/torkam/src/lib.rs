//! Configuration-driven experiments on top of `torkam-core`.
//!
//! A TOML [`config::ExperimentConfig`] selects one of four pipelines
//! (quantum renormalization, classical KAM, spectrum comparison, measure
//! diagnostics). [`validate`] checks the hypotheses each pipeline relies on,
//! [`pipeline::execute`] runs it, and [`report`] writes a JSON report plus
//! CSV tables. Output is deterministic given the config and seed.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod sampling;
pub mod validate;

pub use config::{ExperimentConfig, Mode};
pub use error::{RunError, RunResult};
pub use pipeline::{execute, run_experiment, validate_config, Artifacts, Outcome, RunOptions};
pub use report::{Report, Table};
