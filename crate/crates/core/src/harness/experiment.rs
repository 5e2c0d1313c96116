use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::strategy::Strategy;
use super::synthetic::{generate_synthetic, Dataset, SyntheticSpec};
use crate::data::{RoundConfig, RoundMetrics};
use crate::error::{Error, Result};
use crate::io;
use crate::query::{run_round, Oracle, PrecisionController, RoundContext};

/// Where the features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Files {
        features: PathBuf,
        labels: PathBuf,
        known_classes: usize,
    },
}

/// `run` configuration: the round hyperparameters under their own names,
/// plus the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_initial_fraction")]
    pub initial_fraction: f64,
    #[serde(flatten)]
    pub round: RoundConfig,
}

/// Fraction of the pool's known-class rows labeled before round 1.
pub const DEFAULT_INITIAL_FRACTION: f64 = 0.05;

fn default_initial_fraction() -> f64 {
    DEFAULT_INITIAL_FRACTION
}

const EXPERIMENT_KEYS: [&str; 5] = [
    "data",
    "strategies",
    "seeds",
    "output_dir",
    "initial_fraction",
];

impl ExperimentConfig {
    /// Parses JSON, rejecting keys that are neither experiment nor round
    /// settings.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let json_err = |source| Error::Json {
            path: path.into(),
            source,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
        let round_keys = serde_json::to_value(RoundConfig::default()).expect("config serializes");
        if let (Some(obj), Some(known)) = (value.as_object(), round_keys.as_object()) {
            if let Some(bad) = obj
                .keys()
                .find(|key| !EXPERIMENT_KEYS.contains(&key.as_str()) && !known.contains_key(*key))
            {
                return Err(Error::Format {
                    path: path.into(),
                    reason: format!("unknown field `{bad}`"),
                });
            }
        }
        serde_json::from_value(value).map_err(json_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synthetic(spec) => generate_synthetic(spec),
            DataSource::Files {
                features,
                labels,
                known_classes,
            } => io::load_dataset(features, labels, *known_classes),
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.strategies.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid(
                "experiment config",
                "need at least one strategy and one seed",
            ));
        }
        self.round.validate(k)
    }
}

/// Runs one strategy for `config.rounds` rounds (fewer if the unlabeled pool
/// runs out).
pub fn run_strategy(
    strategy: Strategy,
    data: &Dataset,
    config: &RoundConfig,
    initial_fraction: f64,
) -> Result<Vec<RoundMetrics>> {
    config.validate(data.k)?;
    let mut state = data.initial_state(initial_fraction, config.seed)?;
    let oracle = Oracle::new(data.k, data.true_class.clone());
    let (test_rows, test_labels) = data.test_split();
    let ctx = RoundContext {
        features: data.features.matrix(),
        oracle: &oracle,
        test_rows: &test_rows,
        test_labels: &test_labels,
        config,
        strategy,
    };
    let verbose = std::env::var_os("OSAL_VERBOSE").is_some();
    let mut ctrl = PrecisionController::new(config.target_precision);
    let mut metrics = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        if state.unlabeled().is_empty() {
            break;
        }
        let out = run_round(&mut state, &mut ctrl, &ctx)?;
        if verbose {
            let m = &out.metrics;
            eprintln!(
                "{strategy} seed {} round {}: acc {:.4} precision {:.3} u_hat {} pool {} p_hat {:.3}",
                config.seed, m.round, m.test_accuracy, m.observed_precision, m.u_hat, m.pool_size, m.calibrated_precision
            );
        }
        metrics.push(out.metrics);
    }
    Ok(metrics)
}

/// Aggregates for one strategy across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub seeds: Vec<u64>,
    pub final_accuracy_mean: f64,
    pub final_accuracy_std: f64,
    pub mean_precision_mean: f64,
    pub mean_precision_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub strategies: BTreeMap<String, StrategySummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary statistics from per-seed metric tables.
pub fn summarize(cells: &BTreeMap<Strategy, Vec<(u64, Vec<RoundMetrics>)>>) -> Summary {
    let strategies = cells
        .iter()
        .map(|(strategy, runs)| {
            let finals: Vec<f64> = runs
                .iter()
                .map(|(_, m)| m.last().map_or(0.0, |r| r.test_accuracy))
                .collect();
            let precisions: Vec<f64> = runs
                .iter()
                .map(|(_, m)| {
                    m.iter().map(|r| r.observed_precision).sum::<f64>() / m.len().max(1) as f64
                })
                .collect();
            let (fa_mean, fa_std) = mean_std(&finals);
            let (p_mean, p_std) = mean_std(&precisions);
            (
                strategy.name().to_string(),
                StrategySummary {
                    seeds: runs.iter().map(|(s, _)| *s).collect(),
                    final_accuracy_mean: fa_mean,
                    final_accuracy_std: fa_std,
                    mean_precision_mean: p_mean,
                    mean_precision_std: p_std,
                },
            )
        })
        .collect();
    Summary { strategies }
}

pub fn metrics_file_name(strategy: Strategy, seed: u64) -> String {
    format!("{strategy}_seed{seed}.csv")
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Runs every (strategy × seed) cell, writing one metrics CSV per cell and a
/// `summary.json` into the configured output directory.
pub fn run_experiment(config_path: &Path) -> Result<Summary> {
    let config = ExperimentConfig::load(config_path)?;
    let data = config.dataset()?;
    config.validate(data.k)?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut cells: BTreeMap<Strategy, Vec<(u64, Vec<RoundMetrics>)>> = BTreeMap::new();
    for &strategy in &config.strategies {
        for &seed in &config.seeds {
            let round_cfg = RoundConfig {
                seed,
                ..config.round.clone()
            };
            let metrics = run_strategy(strategy, &data, &round_cfg, config.initial_fraction)?;
            io::write_metrics(&out.join(metrics_file_name(strategy, seed)), &metrics)?;
            cells.entry(strategy).or_default().push((seed, metrics));
        }
    }
    let summary = summarize(&cells);
    let path = out.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
