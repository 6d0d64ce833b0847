//! Supervised risk, the combined objective, the cautious-iteration loop and
//! evaluation.

mod checkpoint;
mod metrics;
mod objective;
mod report;
mod select;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mi::MiError;
use crate::nets::{Architecture, NetError};
use crate::numeric::NumericError;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError,
    ModelState, CHECKPOINT_VERSION,
};
pub use metrics::{argmax_rows, false_prediction_rates, score, spearman, Evaluation};
pub use objective::{
    objective, predict, supervised_risk, total_loss, ObjectiveSettings, ObjectiveValue,
    Predictions, Targets, Workspace,
};
pub use report::{IterationRecord, TrainReport, REPORT_HEADER};
pub use select::{cautious_select, Selection};
pub use train::{evaluate, false_prediction_curve, train, train_seal, train_seal_ci};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("the labeled set is empty")]
    NoLabels,
    #[error("training needs at least 2 instances, got {0}")]
    TooFewInstances(usize),
    #[error("cannot evaluate an empty split")]
    EmptySplit,
    #[error("instance {0} has no ground-truth label")]
    MissingLabel(usize),
    #[error("model has {model} classes but the dataset has {data}")]
    ClassMismatch { model: usize, data: usize },
    #[error("model expects feature width {model} but the dataset has {data}")]
    FeatureMismatch { model: usize, data: usize },
    #[error("{0} requires instance-classifier outputs")]
    NeedsInstanceClassifier(&'static str),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Mi(#[from] MiError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Joint IC + HC training with the MI term on the original labels.
    #[default]
    Seal,
    /// SEAL plus cautious pseudo-labeling iterations.
    SealCi,
    /// Instance classifier alone, cross-entropy only.
    IcOnly,
    /// Hierarchy classifier on pooled raw features, cross-entropy only.
    HcOnly,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Seal, Mode::SealCi, Mode::IcOnly, Mode::HcOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Seal => "seal",
            Mode::SealCi => "seal-ci",
            Mode::IcOnly => "ic-only",
            Mode::HcOnly => "hc-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, TrainError> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| TrainError::Config(format!("unknown mode `{s}`")))
    }
}

/// User-tunable layer sizes; input and output widths come from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub gcn_hidden: usize,
    pub node_dim: usize,
    pub att_dim: usize,
    pub views: usize,
    pub head_hidden: Option<usize>,
    pub head_dropout: f64,
    pub hc_hidden: usize,
    pub attention_penalty: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let a = Architecture::default();
        Self {
            gcn_hidden: a.gcn_hidden,
            node_dim: a.node_dim,
            att_dim: a.att_dim,
            views: a.views,
            head_hidden: a.head_hidden,
            head_dropout: a.head_dropout,
            hc_hidden: a.hc_hidden,
            attention_penalty: a.attention_penalty,
        }
    }
}

impl ModelConfig {
    pub fn architecture(&self, in_dim: usize, num_classes: usize, mode: Mode) -> Architecture {
        let mut arch = Architecture {
            in_dim,
            gcn_hidden: self.gcn_hidden,
            node_dim: self.node_dim,
            att_dim: self.att_dim,
            views: self.views,
            head_hidden: self.head_hidden,
            head_dropout: self.head_dropout,
            hc_in: 0,
            hc_hidden: self.hc_hidden,
            num_classes,
            attention_penalty: self.attention_penalty,
        };
        arch.hc_in = if mode == Mode::HcOnly {
            2 * in_dim
        } else {
            arch.embedding_dim()
        };
        arch
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Pseudo-labels added per cautious iteration.
    pub lambda: usize,
    pub max_iterations: usize,
    pub epochs_per_iteration: usize,
    /// Epoch budget of warm-started iterations after the first; defaults to
    /// `epochs_per_iteration`.
    pub refine_epochs: Option<usize>,
    /// Stop an iteration once the risk has not improved by `min_improvement`
    /// for this many epochs.
    pub patience: usize,
    pub min_improvement: f64,
    pub lr: f64,
    pub alpha_weight: f64,
    pub mi_coefficient: f64,
    /// Negative pairs per positive pair in the instance-level MI term.
    pub negative_ratio: usize,
    pub seed: u64,
    pub warm_start: bool,
    /// Keep pseudo-labels once committed instead of reselecting every iteration.
    pub freeze_pseudo_labels: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Seal,
            lambda: 1,
            max_iterations: 100,
            epochs_per_iteration: 200,
            refine_epochs: None,
            patience: 20,
            min_improvement: 1e-5,
            lr: 0.01,
            alpha_weight: 0.5,
            mi_coefficient: 0.1,
            negative_ratio: 1,
            seed: 0,
            warm_start: true,
            freeze_pseudo_labels: false,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if self.lambda == 0 {
            return fail("lambda must be at least 1".into());
        }
        if self.patience == 0 || self.negative_ratio == 0 {
            return fail("patience and negative_ratio must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.model.head_dropout) {
            return fail(format!(
                "head_dropout {} outside [0, 1)",
                self.model.head_dropout
            ));
        }
        let m = &self.model;
        if [m.gcn_hidden, m.node_dim, m.att_dim, m.views, m.hc_hidden].contains(&0)
            || m.head_hidden == Some(0)
        {
            return fail("layer widths must be positive".into());
        }
        for (name, v) in [
            ("alpha_weight", self.alpha_weight),
            ("mi_coefficient", self.mi_coefficient),
            ("min_improvement", self.min_improvement),
            ("attention_penalty", m.attention_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        Ok(())
    }
}
