use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use osal_core::estimation::{estimate_unknown_classes, EstimationConfig};
use osal_core::harness::{generate_synthetic, run_experiment, Split, SyntheticSpec};
use osal_core::{io, Error};

#[derive(Parser)]
#[command(
    name = "osal",
    version,
    about = "Open-set active learning query engine and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic open-set benchmark (features.e2fm + labels.csv).
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        known: usize,
        #[arg(long)]
        unknown: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long = "per-class")]
        per_class: usize,
        #[arg(long)]
        sep: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long = "test-fraction", default_value_t = 0.2)]
        test_fraction: f64,
    },
    /// Run every (strategy x seed) cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate the unknown-class count of the labeled pool rows.
    Estimate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        umax: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Gen {
            out,
            known,
            unknown,
            dim,
            per_class,
            sep,
            seed,
            test_fraction,
        } => {
            let spec = SyntheticSpec {
                known_classes: known,
                unknown_classes: unknown,
                dim,
                samples_per_class: per_class,
                cluster_separation: sep,
                test_fraction,
                seed,
            };
            let data = generate_synthetic(&spec)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            io::write_features(&out.join("features.e2fm"), &data.features)?;
            io::write_labels(&out.join("labels.csv"), &data.true_class, &data.split)?;
            Ok(
                json!({"samples": data.features.len(), "dim": data.features.dim(), "out": out})
                    .to_string(),
            )
        }
        Command::Run { config } => {
            let summary = run_experiment(&config)?;
            Ok(serde_json::to_string(&summary).expect("summary serializes"))
        }
        Command::Estimate {
            features,
            labels,
            k,
            umax,
            seed,
            restarts,
        } => {
            let data = io::load_dataset(&features, &labels, k)?;
            let rows: Vec<usize> = (0..data.split.len())
                .filter(|&i| data.split[i] == Split::Pool)
                .collect();
            let truth: Vec<usize> = rows.iter().map(|&i| data.true_class[i].min(k)).collect();
            let cfg = EstimationConfig {
                k,
                u_max: umax,
                restarts,
                seed,
                round: 0,
            };
            let est =
                estimate_unknown_classes(&data.features.matrix().select_rows(&rows), &truth, &cfg)?;
            Ok(json!({"u_hat": est.u_hat, "score": est.score}).to_string())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let one_line = e.to_string().replace('\n', " ");
            eprintln!("error: {one_line}");
            ExitCode::FAILURE
        }
    }
}
