//! The superdiffusion classification dataset: two-layer ER multiplexes on a
//! `(p1, p2)` grid, labelled by the spectral criterion.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{mix_seed, ErMultiplexSpec};
use crate::error::{Error, Result};
use crate::mlg::Split;
use crate::mlgraph::{is_superdiffusive, MultilayerNetwork};

/// Stream id reserved for the balancing shuffle.
const BALANCE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperdiffConfig {
    pub step: f64,
    pub train_per: usize,
    pub test_per: usize,
    pub coupling: f64,
    pub n_nodes: usize,
    pub seed: u64,
    /// Worker threads used for labelling.
    pub jobs: usize,
}

impl Default for SuperdiffConfig {
    fn default() -> Self {
        Self { step: 0.01, train_per: 5, test_per: 10, coupling: 1.0, n_nodes: 50, seed: 0, jobs: 1 }
    }
}

impl SuperdiffConfig {
    pub fn validate(&self) -> Result<()> {
        grid(self.step)?;
        if self.train_per == 0 || self.test_per == 0 {
            return Err(Error::Config("per-combination counts must be at least 1".into()));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::Config(format!("coupling must be positive, got {}", self.coupling)));
        }
        if self.n_nodes < 2 || self.jobs == 0 {
            return Err(Error::Config("need n_nodes >= 2 and jobs >= 1".into()));
        }
        Ok(())
    }
}

/// `{step, 2·step, …, 1 − step}`; `step` must split `(0, 1)` evenly.
pub fn grid(step: f64) -> Result<Vec<f64>> {
    let m = (1.0 / step).round();
    if !(step > 0.0 && step < 0.5 + 1e-12) || ((1.0 / step) - m).abs() > 1e-9 * m {
        return Err(Error::Config(format!("step {step} does not divide (0, 1) into a grid")));
    }
    let m = m as usize;
    Ok((1..m).map(|k| k as f64 / m as f64).collect())
}

/// All grid pairs with `p1 <= p2`, in lexicographic order.
pub fn combinations(step: f64) -> Result<Vec<(f64, f64)>> {
    let g = grid(step)?;
    Ok(g.iter().enumerate().flat_map(|(i, &p1)| g[i..].iter().map(move |&p2| (p1, p2))).collect())
}

/// One labelled instance. The network itself is regenerated on demand from
/// the seed; holding ~10⁴ dense 50-node multiplexes in memory is wasteful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub p1: f64,
    pub p2: f64,
    pub seed: u64,
    pub split: Split,
    pub label: bool,
    pub margin: f64,
}

impl Instance {
    pub fn spec(&self, n_nodes: usize, coupling: f64) -> ErMultiplexSpec {
        ErMultiplexSpec { n_nodes, p: vec![self.p1, self.p2], coupling, seed: self.seed }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperdiffusionDataset {
    pub config: SuperdiffConfig,
    /// Balanced.
    pub train: Vec<Instance>,
    /// Everything generated for the test split, unbalanced.
    pub test: Vec<Instance>,
    /// Every generated train instance, before balancing.
    pub train_all: Vec<Instance>,
    pub train_generated: usize,
    pub train_positives: usize,
}

impl SuperdiffusionDataset {
    pub fn network(&self, inst: &Instance) -> Result<MultilayerNetwork> {
        inst.spec(self.config.n_nodes, self.config.coupling).generate()
    }
}

fn label(spec: ErMultiplexSpec, split: Split) -> Result<Instance> {
    let sd = is_superdiffusive(&spec.generate()?)?;
    Ok(Instance { p1: spec.p[0], p2: spec.p[1], seed: spec.seed, split, label: sd.label, margin: sd.margin })
}

/// Takes every positive and an equal-size random subset of the negatives
/// (or the reverse when positives are the majority); keeps generation order.
pub fn balance(instances: &[Instance], seed: u64) -> Vec<Instance> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..instances.len()).partition(|&k| instances[k].label);
    let (keep, mut pool) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, BALANCE_STREAM));
    pool.shuffle(&mut rng);
    let mut chosen: Vec<usize> = keep.iter().copied().chain(pool.into_iter().take(keep.len())).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|k| instances[k].clone()).collect()
}

pub fn build_superdiffusion_dataset(cfg: &SuperdiffConfig) -> Result<SuperdiffusionDataset> {
    cfg.validate()?;
    let combos = combinations(cfg.step)?;
    let per = cfg.train_per + cfg.test_per;
    let mut jobs = Vec::with_capacity(combos.len() * per);
    for (c, &(p1, p2)) in combos.iter().enumerate() {
        for r in 0..per {
            let split = if r < cfg.train_per { Split::Train } else { Split::Test };
            let seed = mix_seed(cfg.seed, (c * per + r) as u64);
            jobs.push((ErMultiplexSpec { n_nodes: cfg.n_nodes, p: vec![p1, p2], coupling: cfg.coupling, seed }, split));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let labelled: Vec<Instance> = pool.install(|| jobs.into_par_iter().map(|(s, split)| label(s, split)).collect::<Result<_>>())?;
    let (train, test): (Vec<Instance>, Vec<Instance>) = labelled.into_iter().partition(|i| i.split == Split::Train);
    let train_positives = train.iter().filter(|i| i.label).count();
    if train_positives == 0 {
        let max_margin = train.iter().map(|i| i.margin).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::Config(format!(
            "no superdiffusive instance among {} training graphs (largest margin {max_margin:.3e}); \
             the coupling weight {} is probably too small or too large",
            train.len(),
            cfg.coupling
        )));
    }
    Ok(SuperdiffusionDataset {
        config: cfg.clone(),
        train_generated: train.len(),
        train: balance(&train, cfg.seed),
        train_all: train,
        test,
        train_positives,
    })
}
