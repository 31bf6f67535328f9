//! Synthetic stand-ins with the shapes of the external node-classification
//! and link-prediction datasets. Both are returned uncoupled; the pipelines
//! add clique coupling on load.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::mlgraph::{LayerGraph, MultilayerNetwork};

pub const GENE_CLASS_SIZES: [usize; 6] = [118, 76, 47, 32, 21, 13];
pub const GENE_LAYERS: usize = 9;

/// 307 genes over nine undirected layers, six unbalanced classes. Same-class
/// pairs link with probability ~0.06 and others with ~0.004, each layer's
/// density scaled by a factor in [0.5, 1.5). Class membership is shuffled
/// over node ids.
pub fn gene_standin(seed: u64) -> Result<(MultilayerNetwork, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = GENE_CLASS_SIZES.iter().enumerate().flat_map(|(k, &s)| std::iter::repeat_n(k, s)).collect();
    labels.shuffle(&mut rng);
    let n = labels.len();
    let mut layers = Vec::with_capacity(GENE_LAYERS);
    for _ in 0..GENE_LAYERS {
        let scale = rng.gen_range(0.5..1.5);
        let mut g = LayerGraph::new(n, false);
        for i in 0..n {
            for j in i + 1..n {
                let p = if labels[i] == labels[j] { 0.06 } else { 0.004 } * scale;
                if rng.gen::<f64>() < p {
                    g.add_edge(i, j, 1.0)?;
                }
            }
        }
        layers.push(g);
    }
    let names = (1..=GENE_LAYERS).map(|a| format!("hvr{a}")).collect();
    Ok((MultilayerNetwork::new(n, layers)?.with_layer_names(names)?, labels))
}

/// `(name, directed, edges)` per layer of the social stand-in.
pub const SOCIAL_LAYERS: [(&str, bool, usize); 3] = [("friendfeed", true, 32_000), ("twitter", true, 42_300), ("youtube", false, 600)];
pub const SOCIAL_NODES: usize = 6400;
const SOCIAL_COMMUNITIES: usize = 16;

/// 6400 users on three platforms with exact edge counts. Users fall into 16
/// equal communities; an edge stays inside its source's community with
/// probability 0.8. A third of each later layer's edges are copied from the
/// first layer when possible, so layers share structure.
pub fn social_standin(seed: u64) -> Result<MultilayerNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SOCIAL_NODES;
    let size = n / SOCIAL_COMMUNITIES;
    let mut first: Vec<(usize, usize)> = Vec::new();
    let mut layers = Vec::with_capacity(SOCIAL_LAYERS.len());
    for (a, &(_, directed, target)) in SOCIAL_LAYERS.iter().enumerate() {
        let mut g = LayerGraph::new(n, directed);
        while g.n_edges() < target {
            let (i, j) = if a > 0 && !first.is_empty() && rng.gen_bool(1.0 / 3.0) {
                first[rng.gen_range(0..first.len())]
            } else {
                let i = rng.gen_range(0..n);
                let j = if rng.gen_bool(0.8) { i / size * size + rng.gen_range(0..size) } else { rng.gen_range(0..n) };
                (i, j)
            };
            if i != j && !g.has_edge(i, j) {
                g.add_edge(i, j, 1.0)?;
            }
        }
        if a == 0 {
            first = g.edges().iter().map(|e| (e.src, e.dst)).collect();
        }
        layers.push(g);
    }
    let names = SOCIAL_LAYERS.iter().map(|l| l.0.to_string()).collect();
    MultilayerNetwork::new(n, layers)?.with_layer_names(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gene_shape() {
        let (net, labels) = gene_standin(0).unwrap();
        assert_eq!((net.n_nodes(), net.n_layers()), (307, 9));
        assert!(net.layers().iter().all(|g| !g.is_directed() && g.n_edges() > 0));
        for (k, &s) in GENE_CLASS_SIZES.iter().enumerate() {
            assert_eq!(labels.iter().filter(|&&y| y == k).count(), s);
        }
        assert!(net.inter_edges().is_empty());
        assert_eq!(gene_standin(0).unwrap(), (net, labels));
    }

    #[test]
    fn gene_layers_are_homophilous() {
        let (net, labels) = gene_standin(1).unwrap();
        let edges = net.layers().iter().flat_map(|g| g.edges());
        let (same, total) = edges.fold((0, 0), |(s, t), e| (s + usize::from(labels[e.src] == labels[e.dst]), t + 1));
        // about a quarter of all pairs are same-class; expected share of edges ~0.8
        assert!(same as f64 > 0.6 * total as f64, "{same}/{total}");
    }

    #[test]
    fn social_shape() {
        let net = social_standin(0).unwrap();
        assert_eq!((net.n_nodes(), net.n_layers()), (6400, 3));
        for (g, &(name, directed, edges)) in net.layers().iter().zip(&SOCIAL_LAYERS) {
            assert_eq!((g.is_directed(), g.n_edges()), (directed, edges), "{name}");
        }
        assert_eq!(net.layer_names(), ["friendfeed", "twitter", "youtube"]);
    }
}
