mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seal_core::par::Exec;
use seal_core::plot::PlotKind;

use crate::config::{Split, CONFIG_ENV};

#[derive(Parser, Debug)]
#[command(
    name = "seal",
    version,
    about = "Hierarchical graph classification experiments"
)]
struct Cli {
    /// TOML experiment config; every key is optional.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic hierarchical dataset and its per-class statistics.
    Gen {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model and write the checkpoint, report and metrics.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// seal, seal-ci, ic-only or hc-only.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score checkpoints on a split, optionally with the false-prediction curve.
    Eval {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<Split>,
        /// Metrics CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the `lambda,false_prediction_rate` curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Comma-separated λ values for the curve.
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<usize>>,
    },
    /// Check the mutual-information identities on random joint distributions.
    VerifyMi {
        #[arg(long)]
        trials: Option<usize>,
        /// `lo-hi` or `aXbXc`.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a CSV series as an SVG line chart.
    Plot {
        /// loss or lambda-curve.
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate `metrics.csv` files from several runs by mode.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let result = config::ExperimentConfig::load(cli.config.as_deref())
        .and_then(|cfg| commands::run(cli.command, cfg, exec));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(error::exit_code(&err))
        }
    }
}
