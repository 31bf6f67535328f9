//! Whole-network binary classification (superdiffusion).

use std::path::{Path, PathBuf};
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Task};
use super::generators::mix_seed;
use super::report::{binary_records, coupled, fit_scaler, split_subset, MetricRecord, ModelCard, RunReport};
use super::superdiff::{Instance, SuperdiffusionDataset};
use crate::error::{Error, Result};
use crate::mlg::{load_jsonl, load_mlg, ManifestEntry, Split};
use crate::mlgraph::MultilayerNetwork;
use crate::nn::{input_features, input_width, GraphClassifier, Standardizer, SupraGraph};
use crate::tensor::{GradStore, ParamStore, Tape, Tensor};
use crate::train::{binary_metrics, train_loop, Objective};

/// Indexed access to labelled networks, materialised one at a time.
pub trait GraphSource {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> bool;
    fn network(&self, i: usize) -> Result<MultilayerNetwork>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generated instances, rebuilt from their seeds.
#[derive(Clone, Debug)]
pub struct InstanceSource {
    pub n_nodes: usize,
    pub coupling: f64,
    pub instances: Vec<Instance>,
}

impl InstanceSource {
    pub fn train(ds: &SuperdiffusionDataset) -> Self {
        Self { n_nodes: ds.config.n_nodes, coupling: ds.config.coupling, instances: ds.train.clone() }
    }

    pub fn test(ds: &SuperdiffusionDataset) -> Self {
        Self { n_nodes: ds.config.n_nodes, coupling: ds.config.coupling, instances: ds.test.clone() }
    }
}

impl GraphSource for InstanceSource {
    fn len(&self) -> usize {
        self.instances.len()
    }

    fn label(&self, i: usize) -> bool {
        self.instances[i].label
    }

    fn network(&self, i: usize) -> Result<MultilayerNetwork> {
        self.instances[i].spec(self.n_nodes, self.coupling).generate()
    }
}

/// One split of an on-disk dataset directory (`manifest.jsonl` + `.mlg` files);
/// training entries dropped by class balancing are skipped.
#[derive(Clone, Debug)]
pub struct ManifestSource {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl ManifestSource {
    pub fn load(dir: &Path, split: Split) -> Result<Self> {
        let entries: Vec<ManifestEntry> = load_jsonl(&dir.join("manifest.jsonl"))?;
        Ok(Self { root: dir.to_path_buf(), entries: entries.into_iter().filter(|e| e.split == split && e.kept).collect() })
    }
}

impl GraphSource for ManifestSource {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn label(&self, i: usize) -> bool {
        self.entries[i].label
    }

    fn network(&self, i: usize) -> Result<MultilayerNetwork> {
        Ok(load_mlg(&self.root.join(&self.entries[i].path))?.network)
    }
}

/// A disjoint-union batch with stacked inputs.
struct Chunk {
    graph: SupraGraph,
    graph_of: Rc<[usize]>,
    x: Tensor,
    y: Vec<f64>,
}

fn load_chunk(src: &dyn GraphSource, ids: &[usize], cfg: &ExperimentConfig, scaler: &Standardizer) -> Result<Chunk> {
    let in_dim = scaler.mean.len();
    let mut graphs = Vec::with_capacity(ids.len());
    let mut data = Vec::new();
    let mut n_layers = None;
    for &i in ids {
        let net = coupled(src.network(i)?, cfg.coupling)?;
        if *n_layers.get_or_insert(net.n_layers()) != net.n_layers() {
            return Err(Error::InvalidArgument(format!("graph {i} has {} layers, expected {}", net.n_layers(), n_layers.unwrap())));
        }
        let x = input_features(&net, cfg.features);
        if x.cols() != in_dim {
            return Err(Error::InvalidArgument(format!("graph {i} has input width {}, expected {in_dim}", x.cols())));
        }
        data.extend_from_slice(x.data());
        graphs.push(SupraGraph::new(&net));
    }
    let refs: Vec<&SupraGraph> = graphs.iter().collect();
    let (graph, graph_of) = SupraGraph::batch(&refs);
    let rows = graph.n_rows();
    let mut x = Tensor::new(rows, in_dim, data)?;
    scaler.apply(&mut x)?;
    Ok(Chunk {
        graph,
        graph_of,
        x,
        y: ids.iter().map(|&i| if src.label(i) { 1.0 } else { 0.0 }).collect(),
    })
}

fn build(cfg: &ExperimentConfig, in_dim: usize, n_layers: usize) -> Result<(GraphClassifier, ParamStore)> {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 3));
    let model = GraphClassifier::new(&mut store, cfg.model(in_dim, n_layers), &mut rng)?;
    Ok((model, store))
}

fn forward(model: &GraphClassifier, store: &ParamStore, c: &Chunk, tape: &mut Tape, rng: Option<&mut ChaCha8Rng>) -> Result<crate::tensor::Var> {
    let x = tape.constant(c.x.clone());
    model.forward(tape, store, &c.graph, &c.graph_of, c.y.len(), x, rng.map(|r| r as &mut dyn rand::RngCore))
}

struct GraphObjective<'a> {
    model: &'a GraphClassifier,
    fit: Vec<Chunk>,
    val: Vec<Chunk>,
}

fn n_graphs(chunks: &[Chunk]) -> usize {
    chunks.iter().map(|c| c.y.len()).sum()
}

impl Objective for GraphObjective<'_> {
    /// The mean loss over all fit graphs, accumulated chunk by chunk so only
    /// one chunk's tape is alive at a time.
    fn accumulate(&self, store: &ParamStore, grads: &mut GradStore, rng: &mut ChaCha8Rng) -> Result<f64> {
        let n = n_graphs(&self.fit) as f64;
        let mut total = 0.0;
        for c in &self.fit {
            let mut tape = Tape::new();
            let p = forward(self.model, store, c, &mut tape, Some(rng))?;
            let l = tape.mse_loss(p, &c.y)?;
            let l = tape.scale(l, c.y.len() as f64 / n);
            tape.backward_into(l, grads)?;
            total += tape.value(l).item();
        }
        Ok(total)
    }

    fn validation_loss(&self, store: &ParamStore) -> Result<f64> {
        let n = n_graphs(&self.val) as f64;
        let mut total = 0.0;
        for c in &self.val {
            let mut tape = Tape::new();
            let p = forward(self.model, store, c, &mut tape, None)?;
            let l = tape.mse_loss(p, &c.y)?;
            total += tape.value(l).item() * c.y.len() as f64 / n;
        }
        Ok(total)
    }
}

/// Probabilities for every graph of `src`, evaluated in chunks.
pub fn predict_graphs(model: &GraphClassifier, store: &ParamStore, src: &dyn GraphSource, cfg: &ExperimentConfig, scaler: &Standardizer) -> Result<Vec<f64>> {
    let ids: Vec<usize> = (0..src.len()).collect();
    let mut out = Vec::with_capacity(ids.len());
    for part in ids.chunks(cfg.chunk_size.max(64)) {
        let c = load_chunk(src, part, cfg, scaler)?;
        let mut tape = Tape::new();
        let p = forward(model, store, &c, &mut tape, None)?;
        out.extend_from_slice(tape.value(p).data());
    }
    Ok(out)
}

fn score(model: &GraphClassifier, store: &ParamStore, src: &dyn GraphSource, split: &str, cfg: &ExperimentConfig, scaler: &Standardizer) -> Result<Vec<MetricRecord>> {
    let probs = predict_graphs(model, store, src, cfg, scaler)?;
    let labels: Vec<bool> = (0..src.len()).map(|i| src.label(i)).collect();
    let mut out = binary_records(Task::GraphClf, split, &binary_metrics(&probs, &labels)?);
    out.push(MetricRecord::new(Task::GraphClf, split, "graphs", labels.len() as f64));
    out.push(MetricRecord::new(Task::GraphClf, split, "positive_rate", labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64));
    Ok(out)
}

fn probe(src: &dyn GraphSource, cfg: &ExperimentConfig) -> Result<(usize, usize)> {
    if src.is_empty() {
        return Err(Error::InvalidArgument("no training graphs".into()));
    }
    let net = coupled(src.network(0)?, cfg.coupling)?;
    Ok((input_width(&net, cfg.features), net.n_layers()))
}

pub fn run_graph_classification(train: &dyn GraphSource, test: &dyn GraphSource, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let (in_dim, n_layers) = probe(train, cfg)?;
    let labels: Vec<usize> = (0..train.len()).map(|i| train.label(i) as usize).collect();
    let all: Vec<usize> = (0..train.len()).collect();
    let (fit, val) = split_subset(&all, &labels, cfg.val_fraction, mix_seed(cfg.seed, 2))?;
    if fit.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(format!("{} training graphs are too few to hold out validation graphs", train.len())));
    }
    let scaler = if cfg.standardize_features {
        let raw = Standardizer::identity(in_dim);
        let xs = fit.chunks(cfg.chunk_size).map(|c| load_chunk(train, c, cfg, &raw).map(|c| c.x)).collect::<Result<Vec<_>>>()?;
        fit_scaler(cfg, in_dim, &xs)
    } else {
        Standardizer::identity(in_dim)
    };
    let chunks = |ids: &[usize]| ids.chunks(cfg.chunk_size).map(|c| load_chunk(train, c, cfg, &scaler)).collect::<Result<Vec<_>>>();
    let (model, mut store) = build(cfg, in_dim, n_layers)?;
    let outcome = {
        let objective = GraphObjective { model: &model, fit: chunks(&fit)?, val: chunks(&val)? };
        train_loop(&mut store, &objective, cfg.optimizer(), cfg.stop(), mix_seed(cfg.seed, 4))?
    };
    let mut metrics = score(&model, &store, train, "train", cfg, &scaler)?;
    metrics.extend(score(&model, &store, test, "test", cfg, &scaler)?);
    let card = ModelCard { in_dim, n_layers, classes: vec![], scaler, config: cfg.clone() };
    Ok(RunReport { card, store, outcome, metrics })
}

pub fn evaluate_graph_classification(test: &dyn GraphSource, card: &ModelCard, trained: &ParamStore) -> Result<Vec<MetricRecord>> {
    let (model, mut store) = build(&card.config, card.in_dim, card.n_layers)?;
    store.copy_values_from(trained)?;
    score(&model, &store, test, "test", &card.config, &card.scaler)
}
