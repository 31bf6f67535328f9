//! Flat TOML experiment configuration with per-task defaults.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AggregatorKind, FeatureMode, MgnnConfig};
use crate::train::{AdamWConfig, StopConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "node-clf")]
    NodeClf,
    #[serde(rename = "link-pred")]
    LinkPred,
    #[serde(rename = "graph-clf")]
    GraphClf,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::NodeClf, Task::LinkPred, Task::GraphClf];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::NodeClf => "node-clf",
            Task::LinkPred => "link-pred",
            Task::GraphClf => "graph-clf",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?} (expected node-clf, link-pred or graph-clf)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,

    pub supra_layers: usize,
    pub head_dim: usize,
    pub heads: usize,
    pub negative_slope: f64,
    pub dropout: f64,
    pub aggregator: AggregatorKind,
    pub aggregator_hidden: usize,
    pub per_layer_intra: bool,
    pub features: FeatureMode,
    /// z-score input columns with training statistics.
    pub standardize_features: bool,
    /// Hidden widths of the classifier / link-scorer MLP.
    pub head_hidden: Vec<usize>,

    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub patience: usize,

    /// Fraction of the non-test examples held out for early stopping.
    pub val_fraction: f64,
    /// Node-clf test fraction and link-pred removed-edge fraction.
    pub test_fraction: f64,
    /// Link-pred target layer.
    pub target_layer: usize,
    /// Inter-layer weight used when an input network has no inter edges.
    pub coupling: f64,
    /// Graphs per gradient-accumulation chunk in graph-clf (the step is still
    /// full-batch).
    pub chunk_size: usize,
}

impl ExperimentConfig {
    pub fn defaults(task: Task) -> Self {
        let base = Self {
            task,
            seed: 0,
            supra_layers: 6,
            head_dim: 60,
            heads: 5,
            negative_slope: 0.2,
            dropout: 0.3,
            aggregator: AggregatorKind::ConcatLinear,
            aggregator_hidden: 64,
            per_layer_intra: false,
            features: FeatureMode::Degree,
            standardize_features: true,
            head_hidden: vec![64],
            learning_rate: 5e-4,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 2500,
            patience: 100,
            val_fraction: 0.1,
            test_fraction: 0.2,
            target_layer: 0,
            coupling: 1.0,
            chunk_size: 32,
        };
        match task {
            Task::NodeClf => base,
            Task::LinkPred => Self { supra_layers: 3, head_dim: 30, learning_rate: 1e-3, weight_decay: 1e-5, patience: 400, ..base },
            Task::GraphClf => Self {
                supra_layers: 4,
                head_dim: 10,
                learning_rate: 5e-3,
                weight_decay: 1e-5,
                max_epochs: 100,
                patience: 100,
                head_hidden: vec![],
                ..base
            },
        }
    }

    /// Parses a flat TOML document. `task` is required; every other key
    /// overrides the task's defaults. Unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let task: Task = match user.get("task") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(v) => return Err(Error::Config(format!("task must be a string, got {v}"))),
            None => return Err(Error::Config("missing required key `task`".into())),
        };
        Self::defaults(task).with_overrides(user)
    }

    pub fn with_overrides(self, overrides: toml::Table) -> Result<Self> {
        let mut table = toml::Table::try_from(&self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            if !table.contains_key(&k) {
                return Err(Error::Config(format!("unknown config key `{k}`")));
            }
            table.insert(k, v);
        }
        let cfg: Self = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        self.stop().validate()?;
        self.model(1, 1).validate()?;
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) || !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("val_fraction and test_fraction must lie in (0, 1)".into()));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::Config(format!("coupling must be positive, got {}", self.coupling)));
        }
        if self.chunk_size == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config("chunk_size and head_hidden widths must be positive".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn stop(&self) -> StopConfig {
        StopConfig { max_epochs: self.max_epochs, patience: self.patience }
    }

    pub fn model(&self, in_dim: usize, n_layers: usize) -> MgnnConfig {
        MgnnConfig {
            in_dim,
            head_dim: self.head_dim,
            heads: self.heads,
            supra_layers: self.supra_layers,
            negative_slope: self.negative_slope,
            dropout: self.dropout,
            aggregator: self.aggregator,
            aggregator_hidden: self.aggregator_hidden,
            per_layer_intra: self.per_layer_intra,
            n_layers,
        }
    }
}
