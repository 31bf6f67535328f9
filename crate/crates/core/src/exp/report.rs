//! What a pipeline run produces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use crate::error::{Error, Result};
use crate::mlgraph::MultilayerNetwork;
use crate::nn::Standardizer;
use crate::tensor::Tensor;
use crate::tensor::ParamStore;
use crate::train::{BinaryMetrics, TrainOutcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub task: Task,
    pub split: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRecord {
    pub fn new(task: Task, split: &str, metric: &str, value: f64) -> Self {
        Self { task, split: split.into(), metric: metric.into(), value }
    }
}

pub(crate) fn binary_records(task: Task, split: &str, m: &BinaryMetrics) -> Vec<MetricRecord> {
    [("accuracy", m.accuracy), ("auc", m.auc), ("precision", m.precision), ("recall", m.recall), ("f1", m.f1)]
        .into_iter()
        .map(|(k, v)| MetricRecord::new(task, split, k, v))
        .collect()
}

/// Everything needed to rebuild a trained model around its checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub in_dim: usize,
    pub n_layers: usize,
    /// Node-classification class names, in logit order.
    pub classes: Vec<String>,
    pub scaler: Standardizer,
    pub config: ExperimentConfig,
}

impl ModelCard {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("card serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let card: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        card.config.validate()?;
        Ok(card)
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub card: ModelCard,
    pub store: ParamStore,
    pub outcome: TrainOutcome,
    pub metrics: Vec<MetricRecord>,
}

impl RunReport {
    pub fn metric(&self, split: &str, name: &str) -> Option<f64> {
        find_metric(&self.metrics, split, name)
    }

    /// Human-readable digest.
    pub fn summary(&self) -> String {
        let c = &self.card.config;
        let mut s = String::new();
        let _ = writeln!(s, "task            {}", c.task);
        let _ = writeln!(s, "seed            {}", c.seed);
        let _ = writeln!(
            s,
            "architecture    {} supra-layers, GAT {}x{} heads, {:?} aggregator",
            c.supra_layers, c.head_dim, c.heads, c.aggregator
        );
        let _ = writeln!(s, "parameters      {}", self.store.n_scalars());
        let _ = writeln!(
            s,
            "epochs          {} run, best {} (val loss {:.6})",
            self.outcome.history.len(),
            self.outcome.best_epoch,
            self.outcome.best_val_loss
        );
        for m in &self.metrics {
            let _ = writeln!(s, "{:<15} {:.4}", format!("{}.{}", m.split, m.metric), m.value);
        }
        s
    }
}

pub fn find_metric(metrics: &[MetricRecord], split: &str, name: &str) -> Option<f64> {
    metrics.iter().find(|m| m.split == split && m.metric == name).map(|m| m.value)
}

pub(crate) fn fit_scaler<'a>(cfg: &ExperimentConfig, cols: usize, inputs: impl IntoIterator<Item = &'a Tensor>) -> Standardizer {
    if cfg.standardize_features {
        Standardizer::fit(inputs)
    } else {
        Standardizer::identity(cols)
    }
}

/// Adds clique coupling to multi-layer networks that arrive without inter edges.
pub(crate) fn coupled(net: MultilayerNetwork, weight: f64) -> Result<MultilayerNetwork> {
    if net.n_layers() > 1 && net.inter_edges().is_empty() {
        net.build_multiplex_clique(weight)
    } else {
        Ok(net)
    }
}

/// Stratified split of the subset `ids` of a labelled population. Classes
/// absent from the subset are skipped rather than rejected.
pub(crate) fn split_subset(ids: &[usize], labels: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut dense = std::collections::BTreeMap::new();
    for &i in ids {
        let next = dense.len();
        dense.entry(labels[i]).or_insert(next);
    }
    let local: Vec<usize> = ids.iter().map(|&i| dense[&labels[i]]).collect();
    let (rest, sample) = crate::train::stratified_split(&local, dense.len(), fraction, seed)?;
    Ok((rest.into_iter().map(|k| ids[k]).collect(), sample.into_iter().map(|k| ids[k]).collect()))
}
