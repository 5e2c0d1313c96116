//! Synthetic benchmarks, comparison strategies and experiment orchestration.

mod experiment;
mod strategy;
mod synthetic;

pub use experiment::{
    metrics_file_name, run_experiment, run_strategy, summarize, DataSource, ExperimentConfig,
    StrategySummary, Summary, DEFAULT_INITIAL_FRACTION, SUMMARY_FILE,
};
pub use strategy::Strategy;
pub use synthetic::{generate_synthetic, Dataset, Split, SyntheticSpec};
