//! Intra-layer link prediction on one target layer.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Task};
use super::generators::mix_seed;
use super::link::{make_link_split, LinkSplit, Pair};
use super::report::{binary_records, coupled, fit_scaler, MetricRecord, ModelCard, RunReport};
use crate::error::{Error, Result};
use crate::mlgraph::MultilayerNetwork;
use crate::nn::{input_features, input_width, LinkPredictor, Standardizer, SupraGraph};
use crate::tensor::{GradStore, ParamStore, Tape, Tensor, Var};
use crate::train::{binary_metrics, random_split, train_loop, Objective};

struct Prepared {
    split: LinkSplit,
    graph: SupraGraph,
    x: Tensor,
    model: LinkPredictor,
    store: ParamStore,
    card: ModelCard,
}

/// Splits the target layer, removes the test edges and builds the model on
/// what remains.
fn prepare(net: &MultilayerNetwork, cfg: &ExperimentConfig, scaler: Option<&Standardizer>) -> Result<Prepared> {
    let net = coupled(net.clone(), cfg.coupling)?;
    let split = make_link_split(&net, cfg.target_layer, cfg.test_fraction, mix_seed(cfg.seed, 1))?;
    let seen = split.training_network(&net)?;
    let in_dim = input_width(&seen, cfg.features);
    let mut x = input_features(&seen, cfg.features);
    let scaler = scaler.cloned().unwrap_or_else(|| fit_scaler(cfg, in_dim, [&x]));
    scaler.apply(&mut x)?;
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 3));
    let model = LinkPredictor::new(&mut store, cfg.model(in_dim, seen.n_layers()), &cfg.head_hidden, cfg.target_layer, &mut rng)?;
    let card = ModelCard { in_dim, n_layers: seen.n_layers(), classes: vec![], scaler, config: cfg.clone() };
    Ok(Prepared { graph: SupraGraph::new(&seen), x, split, model, store, card })
}

struct Batch {
    left: Rc<[usize]>,
    right: Rc<[usize]>,
    y: Vec<f64>,
}

impl Batch {
    fn new(pairs: &[Pair], y: &[f64], ids: &[usize]) -> Self {
        Self {
            left: ids.iter().map(|&k| pairs[k].0).collect(),
            right: ids.iter().map(|&k| pairs[k].1).collect(),
            y: ids.iter().map(|&k| y[k]).collect(),
        }
    }

    fn all(pairs: &[Pair], y: &[f64]) -> Self {
        Self::new(pairs, y, &(0..pairs.len()).collect::<Vec<_>>())
    }
}

fn scores(p: &Prepared, tape: &mut Tape, store: &ParamStore, batch: &Batch, rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
    let x = tape.constant(p.x.clone());
    let emb = p.model.embed(tape, store, &p.graph, x, rng.map(|r| r as &mut dyn rand::RngCore))?;
    p.model.score(tape, store, emb, &batch.left, &batch.right)
}

struct LinkObjective<'a> {
    p: &'a Prepared,
    fit: Batch,
    val: Batch,
}

impl Objective for LinkObjective<'_> {
    fn accumulate(&self, store: &ParamStore, grads: &mut GradStore, rng: &mut ChaCha8Rng) -> Result<f64> {
        let mut tape = Tape::new();
        let s = scores(self.p, &mut tape, store, &self.fit, Some(rng))?;
        let loss = tape.bce_loss(s, &self.fit.y)?;
        tape.backward_into(loss, grads)?;
        Ok(tape.value(loss).item())
    }

    fn validation_loss(&self, store: &ParamStore) -> Result<f64> {
        let mut tape = Tape::new();
        let s = scores(self.p, &mut tape, store, &self.val, None)?;
        let loss = tape.bce_loss(s, &self.val.y)?;
        Ok(tape.value(loss).item())
    }
}

fn metrics(p: &Prepared, store: &ParamStore) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    for (name, (pairs, y)) in [("train", p.split.train_pairs()), ("test", p.split.test_pairs())] {
        let batch = Batch::all(&pairs, &y);
        let mut tape = Tape::new();
        let s = scores(p, &mut tape, store, &batch, None)?;
        let labels: Vec<bool> = y.iter().map(|&t| t == 1.0).collect();
        out.extend(binary_records(Task::LinkPred, name, &binary_metrics(tape.value(s).data(), &labels)?));
    }
    Ok(out)
}

pub fn run_link_prediction(net: &MultilayerNetwork, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut p = prepare(net, cfg, None)?;
    let (pairs, y) = p.split.train_pairs();
    let (fit, val) = random_split(pairs.len(), cfg.val_fraction, mix_seed(cfg.seed, 2))?;
    if fit.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(format!("{} training pairs are too few to hold out validation pairs", pairs.len())));
    }
    let mut store = std::mem::take(&mut p.store);
    let outcome = {
        let objective = LinkObjective { p: &p, fit: Batch::new(&pairs, &y, &fit), val: Batch::new(&pairs, &y, &val) };
        train_loop(&mut store, &objective, cfg.optimizer(), cfg.stop(), mix_seed(cfg.seed, 4))?
    };
    let metrics = metrics(&p, &store)?;
    Ok(RunReport { card: p.card, store, outcome, metrics })
}

/// Scores `trained` on the split implied by the card; pass `None` to score
/// the freshly initialised model instead.
pub fn evaluate_link_prediction(net: &MultilayerNetwork, card: &ModelCard, trained: Option<&ParamStore>) -> Result<Vec<MetricRecord>> {
    let mut p = prepare(net, &card.config, Some(&card.scaler))?;
    if let Some(t) = trained {
        p.store.copy_values_from(t)?;
    }
    metrics(&p, &p.store)
}
