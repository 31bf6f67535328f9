//! Transductive node classification on a multiplex.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Task};
use super::generators::mix_seed;
use super::report::{coupled, fit_scaler, split_subset, MetricRecord, ModelCard, RunReport};
use crate::error::{Error, Result};
use crate::mlg::MlgDocument;
use crate::mlgraph::{class_index, MultilayerNetwork};
use crate::nn::{input_features, input_width, NodeClassifier, Standardizer, SupraGraph};
use crate::tensor::{GradStore, ParamStore, Tape, Tensor};
use crate::train::{accuracy, argmax_rows, inverse_frequency_weights, macro_f1, train_loop, Objective};

#[derive(Clone, Debug)]
pub struct NodeData {
    pub net: MultilayerNetwork,
    /// Dense class id per node.
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl NodeData {
    pub fn new(net: MultilayerNetwork, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        if labels.len() != net.n_nodes() {
            return Err(Error::InvalidArgument(format!("{} labels for {} nodes", labels.len(), net.n_nodes())));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(Error::InvalidArgument(format!("label {y} outside {} classes", classes.len())));
        }
        Ok(Self { net, labels, classes })
    }

    /// Every node must carry a `label` record.
    pub fn from_document(doc: &MlgDocument) -> Result<Self> {
        let n = doc.network.n_nodes();
        if let Some(i) = (0..n).find(|i| !doc.labels.contains_key(i)) {
            return Err(Error::InvalidArgument(format!(
                "node {i} has no label ({} of {n} nodes labelled)",
                doc.labels.len()
            )));
        }
        let names: Vec<String> = (0..n).map(|i| doc.labels[&i].clone()).collect();
        let (classes, index) = class_index(&names);
        let labels = names.iter().map(|s| index[s]).collect();
        Self::new(doc.network.clone(), labels, classes)
    }
}

/// Train / validation / test node ids, each sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSplits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn node_splits(data: &NodeData, cfg: &ExperimentConfig) -> Result<NodeSplits> {
    let all: Vec<usize> = (0..data.labels.len()).collect();
    let (rest, test) = split_subset(&all, &data.labels, cfg.test_fraction, mix_seed(cfg.seed, 1))?;
    let (train, val) = split_subset(&rest, &data.labels, cfg.val_fraction, mix_seed(cfg.seed, 2))?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} nodes are too few for a train/val/test split",
            data.labels.len()
        )));
    }
    Ok(NodeSplits { train, val, test })
}

struct Prepared {
    graph: SupraGraph,
    x: Tensor,
    model: NodeClassifier,
    store: ParamStore,
    card: ModelCard,
}

/// Without a card the scaler is fitted on this network's inputs (features
/// carry no labels, so fitting on every node is leak-free).
fn prepare(data: &NodeData, cfg: &ExperimentConfig, scaler: Option<&Standardizer>) -> Result<Prepared> {
    let net = coupled(data.net.clone(), cfg.coupling)?;
    let in_dim = input_width(&net, cfg.features);
    let mut x = input_features(&net, cfg.features);
    let scaler = scaler.cloned().unwrap_or_else(|| fit_scaler(cfg, in_dim, [&x]));
    scaler.apply(&mut x)?;
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 3));
    let model = NodeClassifier::new(&mut store, cfg.model(in_dim, net.n_layers()), &cfg.head_hidden, data.classes.len(), &mut rng)?;
    let card = ModelCard { in_dim, n_layers: net.n_layers(), classes: data.classes.clone(), scaler, config: cfg.clone() };
    Ok(Prepared { graph: SupraGraph::new(&net), x, model, store, card })
}

struct NodeObjective<'a> {
    p: &'a Prepared,
    train: Rc<[usize]>,
    train_y: Vec<usize>,
    val: Rc<[usize]>,
    val_y: Vec<usize>,
    weights: Vec<f64>,
}

impl NodeObjective<'_> {
    fn loss(&self, store: &ParamStore, rng: Option<&mut ChaCha8Rng>, val: bool) -> Result<(Tape, crate::tensor::Var)> {
        let mut tape = Tape::new();
        let x = tape.constant(self.p.x.clone());
        let logits = self.p.model.forward(&mut tape, store, &self.p.graph, x, rng.map(|r| r as &mut dyn rand::RngCore))?;
        let (ids, y) = if val { (&self.val, &self.val_y) } else { (&self.train, &self.train_y) };
        let sel = tape.gather_rows(logits, ids)?;
        let loss = tape.weighted_cross_entropy(sel, y, &self.weights)?;
        Ok((tape, loss))
    }
}

impl Objective for NodeObjective<'_> {
    fn accumulate(&self, store: &ParamStore, grads: &mut GradStore, rng: &mut ChaCha8Rng) -> Result<f64> {
        let (tape, loss) = self.loss(store, Some(rng), false)?;
        tape.backward_into(loss, grads)?;
        Ok(tape.value(loss).item())
    }

    fn validation_loss(&self, store: &ParamStore) -> Result<f64> {
        let (tape, loss) = self.loss(store, None, true)?;
        Ok(tape.value(loss).item())
    }
}

fn predict(p: &Prepared, store: &ParamStore) -> Result<Vec<usize>> {
    let mut tape = Tape::new();
    let x = tape.constant(p.x.clone());
    let logits = p.model.forward(&mut tape, store, &p.graph, x, None)?;
    Ok(argmax_rows(tape.value(logits).data(), p.card.classes.len()))
}

fn metrics(p: &Prepared, store: &ParamStore, data: &NodeData, splits: &NodeSplits) -> Result<Vec<MetricRecord>> {
    let pred = predict(p, store)?;
    let pick = |ids: &[usize], v: &[usize]| ids.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let c = data.classes.len();
    let mut out = Vec::new();
    for (name, ids) in [("train", &splits.train), ("test", &splits.test)] {
        let (yp, yt) = (pick(ids, &pred), pick(ids, &data.labels));
        out.push(MetricRecord::new(Task::NodeClf, name, "accuracy", accuracy(&yp, &yt)?));
        out.push(MetricRecord::new(Task::NodeClf, name, "macro_f1", macro_f1(&yp, &yt, c)?));
    }
    let mut counts = vec![0usize; c];
    splits.test.iter().for_each(|&i| counts[data.labels[i]] += 1);
    let majority = *counts.iter().max().unwrap_or(&0) as f64 / splits.test.len() as f64;
    out.push(MetricRecord::new(Task::NodeClf, "test", "majority_baseline", majority));
    Ok(out)
}

pub fn run_node_classification(data: &NodeData, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let splits = node_splits(data, cfg)?;
    let mut p = prepare(data, cfg, None)?;
    let pick = |ids: &[usize]| ids.iter().map(|&i| data.labels[i]).collect::<Vec<_>>();
    let train_y = pick(&splits.train);
    let mut weights = inverse_frequency_weights(&train_y, data.classes.len());
    // classes missing from the training split still need a positive weight
    weights.iter_mut().filter(|w| !w.is_finite() || **w <= 0.0).for_each(|w| *w = 1.0);
    let mut store = std::mem::take(&mut p.store);
    let outcome = {
        let objective = NodeObjective {
            p: &p,
            train: splits.train.iter().copied().collect(),
            train_y,
            val: splits.val.iter().copied().collect(),
            val_y: pick(&splits.val),
            weights,
        };
        train_loop(&mut store, &objective, cfg.optimizer(), cfg.stop(), mix_seed(cfg.seed, 4))?
    };
    let metrics = metrics(&p, &store, data, &splits)?;
    Ok(RunReport { card: p.card, store, outcome, metrics })
}

/// Re-derives the split from the card's seed and scores a trained store.
pub fn evaluate_node_classification(data: &NodeData, card: &ModelCard, trained: &ParamStore) -> Result<Vec<MetricRecord>> {
    if data.classes != card.classes {
        return Err(Error::InvalidArgument(format!("data classes {:?} differ from the model's {:?}", data.classes, card.classes)));
    }
    let splits = node_splits(data, &card.config)?;
    let mut p = prepare(data, &card.config, Some(&card.scaler))?;
    p.store.copy_values_from(trained)?;
    metrics(&p, &p.store, data, &splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp::generators::clique_communities;
    use crate::mlgraph::LayerGraph;

    fn toy() -> NodeData {
        let (net, labels) = clique_communities(&[12, 8], 2).unwrap();
        NodeData::new(net, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig { supra_layers: 2, head_dim: 4, heads: 2, max_epochs: 60, patience: 60, learning_rate: 1e-2, dropout: 0.0, test_fraction: 0.25, val_fraction: 0.2, ..ExperimentConfig::defaults(Task::NodeClf) }
    }

    #[test]
    fn separable_cliques_are_learned() {
        let report = run_node_classification(&toy(), &small_cfg()).unwrap();
        assert_eq!(report.metric("test", "accuracy"), Some(1.0), "{}", report.summary());
        let again = evaluate_node_classification(&toy(), &report.card, &report.store).unwrap();
        assert_eq!(again, report.metrics);
    }

    #[test]
    fn splits_are_stratified_and_disjoint() {
        let s = node_splits(&toy(), &small_cfg()).unwrap();
        assert_eq!(s.test.len(), 5);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 20);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn missing_label_is_an_error() {
        let g = LayerGraph::from_edges(3, false, [(0, 1)]).unwrap();
        let mut doc = MlgDocument::new(MultilayerNetwork::new(3, vec![g]).unwrap());
        doc.labels.insert(0, "x".into());
        doc.labels.insert(2, "y".into());
        let err = NodeData::from_document(&doc).unwrap_err();
        assert!(err.to_string().contains("node 1"), "{err}");
    }
}
