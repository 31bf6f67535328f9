//! Train/test split of one layer's edges for link prediction.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlgraph::{LayerGraph, MultilayerNetwork};

pub type Pair = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub target_layer: usize,
    pub train_pos: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub train_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

impl LinkSplit {
    /// The network the model sees while training: the target layer without
    /// its test edges, every other layer untouched.
    pub fn training_network(&self, net: &MultilayerNetwork) -> Result<MultilayerNetwork> {
        net.with_layer(self.target_layer, net.layer(self.target_layer).without_edges(&self.test_pos)?)
    }

    /// Pairs and 0/1 targets, positives first.
    pub fn train_pairs(&self) -> (Vec<Pair>, Vec<f64>) {
        labelled(&self.train_pos, &self.train_neg)
    }

    pub fn test_pairs(&self) -> (Vec<Pair>, Vec<f64>) {
        labelled(&self.test_pos, &self.test_neg)
    }
}

fn labelled(pos: &[Pair], neg: &[Pair]) -> (Vec<Pair>, Vec<f64>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let y = std::iter::repeat_n(1.0, pos.len()).chain(std::iter::repeat_n(0.0, neg.len())).collect();
    (pairs, y)
}

fn key(g: &LayerGraph, (i, j): Pair) -> Pair {
    if g.is_directed() || i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// `count` distinct non-edges of `g`, uniformly, no self-pairs. Unordered for
/// undirected layers.
fn sample_non_edges(g: &LayerGraph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Pair>> {
    let n = g.n_nodes();
    let slots = if g.is_directed() { n * n.saturating_sub(1) } else { n * n.saturating_sub(1) / 2 };
    let available = slots - g.n_edges();
    if available < count {
        return Err(Error::InvalidArgument(format!("only {available} non-edges available, {count} negatives needed")));
    }
    if 2 * count > available {
        // dense layer: enumerate, shuffle, take
        let mut all: Vec<Pair> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && (g.is_directed() || i < j) && !g.has_edge(i, j))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j || g.has_edge(i, j) {
            continue;
        }
        let p = key(g, (i, j));
        if seen.insert(p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Holds out `⌊fraction·E⌋` (at least one) target-layer edges as test
/// positives and draws as many negatives for each side from the layer's
/// non-edges.
pub fn make_link_split(net: &MultilayerNetwork, target_layer: usize, fraction: f64, seed: u64) -> Result<LinkSplit> {
    if target_layer >= net.n_layers() {
        return Err(Error::InvalidArgument(format!("target layer {target_layer} of {}", net.n_layers())));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {fraction} must lie in (0, 1)")));
    }
    let g = net.layer(target_layer);
    let e = g.n_edges();
    if e < 5 {
        return Err(Error::InvalidArgument(format!("target layer has {e} edges, need at least 5")));
    }
    let n_test = ((e as f64 * fraction).floor() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<Pair> = g.edges().iter().map(|x| (x.src, x.dst)).collect();
    edges.shuffle(&mut rng);
    let train_pos = edges.split_off(n_test);
    let test_pos = edges;
    let mut neg = sample_non_edges(g, e, &mut rng)?;
    let train_neg = neg.split_off(n_test);
    Ok(LinkSplit { target_layer, train_pos, test_pos, train_neg, test_neg: neg })
}

/// Violations of the split's disjointness and no-leakage guarantees; empty
/// when the split is sound.
pub fn leakage_report(net: &MultilayerNetwork, split: &LinkSplit) -> Result<Vec<String>> {
    let g = net.layer(split.target_layer);
    let trained = split.training_network(net)?;
    let tg = trained.layer(split.target_layer);
    let mut issues = Vec::new();
    let sets = [("train_pos", &split.train_pos), ("test_pos", &split.test_pos), ("train_neg", &split.train_neg), ("test_neg", &split.test_neg)];
    let mut owner = std::collections::HashMap::new();
    for (name, set) in sets {
        for &p in set.iter() {
            if let Some(prev) = owner.insert(key(g, p), name) {
                issues.push(format!("{p:?} in both {prev} and {name}"));
            }
        }
    }
    for &(i, j) in &split.test_pos {
        if tg.has_edge(i, j) {
            issues.push(format!("test positive {:?} visible in training graph", (i, j)));
        }
    }
    for &(i, j) in split.train_neg.iter().chain(&split.test_neg) {
        if i == j || g.has_edge(i, j) {
            issues.push(format!("negative {:?} is an edge or self-pair", (i, j)));
        }
    }
    if split.train_neg.len() != split.train_pos.len() || split.test_neg.len() != split.test_pos.len() {
        issues.push("negative counts differ from positive counts".into());
    }
    Ok(issues)
}
