//! Seeded synthetic multiplexes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlgraph::{LayerGraph, MultilayerNetwork};

/// SplitMix64 finaliser; used to derive independent child seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn er_layer(n: usize, p: f64, rng: &mut ChaCha8Rng) -> LayerGraph {
    let mut g = LayerGraph::new(n, false);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen::<f64>() < p {
                g.add_edge(i, j, 1.0).expect("fresh pair");
            }
        }
    }
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErMultiplexSpec {
    pub n_nodes: usize,
    /// One edge probability per layer, ascending.
    pub p: Vec<f64>,
    pub coupling: f64,
    pub seed: u64,
}

impl ErMultiplexSpec {
    pub fn two_layer(p1: f64, p2: f64, coupling: f64, seed: u64) -> Self {
        Self { n_nodes: 50, p: vec![p1, p2], coupling, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 || self.p.is_empty() {
            return Err(Error::InvalidArgument("ER multiplex needs nodes and layers".into()));
        }
        if self.p.iter().any(|p| !(0.0..=1.0).contains(p)) || self.p.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument(format!("layer probabilities {:?} must be ascending in [0, 1]", self.p)));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling {}", self.coupling)));
        }
        Ok(())
    }

    /// Independent `G(n, p_α)` layers, clique-coupled.
    pub fn generate(&self) -> Result<MultilayerNetwork> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let layers = self.p.iter().map(|&p| er_layer(self.n_nodes, p, &mut rng)).collect();
        MultilayerNetwork::new(self.n_nodes, layers)?.build_multiplex_clique(self.coupling)
    }
}

/// Two planted communities `A = [0, n/2)` and `B = [n/2, n)` in every layer.
/// Within-A pairs connect with `p_a`, within-B with `p_b`, cross pairs with
/// `p_out`; layers are drawn independently and clique-coupled with weight 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_nodes: usize,
    pub n_layers: usize,
    pub p_a: f64,
    pub p_b: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn generate(&self) -> Result<MultilayerNetwork> {
        if self.n_nodes < 2 || self.n_layers == 0 {
            return Err(Error::InvalidArgument("planted multiplex needs two nodes and a layer".into()));
        }
        if [self.p_a, self.p_b, self.p_out].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
        }
        let half = self.n_nodes / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let layers = (0..self.n_layers)
            .map(|_| {
                let mut g = LayerGraph::new(self.n_nodes, false);
                for i in 0..self.n_nodes {
                    for j in i + 1..self.n_nodes {
                        let p = match (i < half, j < half) {
                            (true, true) => self.p_a,
                            (false, false) => self.p_b,
                            _ => self.p_out,
                        };
                        if rng.gen::<f64>() < p {
                            g.add_edge(i, j, 1.0).expect("fresh pair");
                        }
                    }
                }
                g
            })
            .collect();
        MultilayerNetwork::new(self.n_nodes, layers)?.build_multiplex_clique(1.0)
    }
}

/// Disjoint cliques of the given sizes, copied into `n_layers` identical
/// clique-coupled layers. Node labels are the clique index.
pub fn clique_communities(sizes: &[usize], n_layers: usize) -> Result<(MultilayerNetwork, Vec<usize>)> {
    let n: usize = sizes.iter().sum();
    let mut g = LayerGraph::new(n, false);
    let mut labels = Vec::with_capacity(n);
    let mut start = 0;
    for (k, &s) in sizes.iter().enumerate() {
        for i in start..start + s {
            for j in i + 1..start + s {
                g.add_edge(i, j, 1.0)?;
            }
        }
        labels.extend(std::iter::repeat_n(k, s));
        start += s;
    }
    let net = MultilayerNetwork::new(n, vec![g; n_layers])?.build_multiplex_clique(1.0)?;
    Ok((net, labels))
}
