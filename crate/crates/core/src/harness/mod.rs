//! Seeded experiment campaigns over the benchmark cases and their file outputs.

pub mod campaign;
pub mod config;
pub mod output;

pub use campaign::{draw_start, quantile, run_campaign, Campaign, CampaignSummary, RepeatResult, THREADS_ENV};
pub use config::{ExperimentConfig, GiboOverrides, OptimizerKind};
pub use output::{read_evals, write_comparison, write_outputs, EvalRow};
