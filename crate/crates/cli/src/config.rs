//! Experiment configuration: one TOML file, every field defaulted.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use seal_core::synthgen::SynthConfig;
use seal_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::UsageError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "SEAL_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset generation (`gen`).
    pub synth: SynthConfig,
    /// Training (`train`).
    pub train: TrainConfig,
    pub paths: Paths,
    pub eval: EvalOptions,
    pub verify: VerifyOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Dataset written by `gen` and read by `train` / `eval`. Default `dataset.json`.
    pub dataset: PathBuf,
    /// Per-class statistics written by `gen`. Default `dataset_stats.csv`.
    pub stats: PathBuf,
    /// Directory receiving the outputs of `train`. Default `run`.
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "dataset.json".into(),
            stats: "dataset_stats.csv".into(),
            out_dir: "run".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Labeled,
    Unlabeled,
    #[default]
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Split scored by `eval`. Default `test`.
    pub split: Split,
    /// λ values of the false-prediction curve. Default 50, 100, …, 1000.
    pub lambda_grid: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: Split::Test,
            lambda_grid: (1..=20).map(|k| 50 * k).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Random joints checked by `verify-mi`. Default 1000.
    pub trials: usize,
    /// Alphabet sizes: a range `lo-hi` or fixed `aXbXc`. Default `2-5`.
    pub sizes: String,
    /// Default 0.
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            sizes: "2-5".into(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = toml::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self).context("serializing the resolved config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg: ExperimentConfig = toml::from_str("[train]\nlambda = 5\n").unwrap();
        assert_eq!(cfg.train.lambda, 5);
        assert_eq!(cfg.train.epochs_per_iteration, 200);
        assert_eq!(cfg.verify.trials, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[train]\nlambdaa = 5\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("extra = 1\n").is_err());
    }
}
