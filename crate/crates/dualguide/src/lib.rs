//! Experiment runner for guided discrete diffusion sampling: TOML configs,
//! parallel chains, JSONL traces, CSV metrics and the `dualguide` CLI.

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod report;
pub mod runner;

pub use dualguide_core as core;

pub use commands::{cmd_analyze, cmd_oracle, cmd_sample, cmd_sweep, AnalyzeMode, Job};
pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
