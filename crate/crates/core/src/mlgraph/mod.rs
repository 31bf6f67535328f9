//! Multilayer network data model.
//!
//! A [`MultilayerNetwork`] holds `N` nodes replicated over `L` layers. Each
//! layer is a [`LayerGraph`] over node ids `0..N`; edges between replicas in
//! different layers live in a separate inter-layer edge list. Replicas are
//! flattened layer-major, so layer `α` occupies rows `αN..(α+1)N` of every
//! supra-matrix and every replica feature matrix.

mod eigen;
mod supra;

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

pub use eigen::{symmetric_eigen, symmetric_eigenvalues};
pub use supra::{
    algebraic_connectivity, diffusion_decay_rate, is_superdiffusive, laplacian_spectrum,
    layer_adjacency, layer_laplacian, supra_adjacency, supra_degree, supra_laplacian, Superdiffusion,
    SupraKind, SupraMatrix, SUPERDIFFUSION_TOL,
};

pub type NodeId = usize;
pub type LayerId = usize;

/// Copy `(node, layer)` of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Replica {
    pub node: NodeId,
    pub layer: LayerId,
}

impl Replica {
    pub fn new(node: NodeId, layer: LayerId) -> Self {
        Self { node, layer }
    }

    /// Layer-major flat index `layer * n_nodes + node`.
    #[inline]
    pub fn flat(self, n_nodes: usize) -> usize {
        self.layer * n_nodes + self.node
    }

    #[inline]
    pub fn from_flat(index: usize, n_nodes: usize) -> Self {
        Self { node: index % n_nodes, layer: index / n_nodes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// One network layer (or any simple graph over `0..n`).
///
/// Undirected graphs store each edge once, in insertion orientation, and
/// answer neighbourhood queries symmetrically. Self-loops are rejected: the
/// attention layers add their own.
#[derive(Clone, Debug)]
pub struct LayerGraph {
    n_nodes: usize,
    directed: bool,
    edges: Vec<Edge>,
    in_adj: Vec<Vec<(usize, f64)>>,
    out_deg: Vec<usize>,
    index: HashSet<(usize, usize)>,
}

impl PartialEq for LayerGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n_nodes == other.n_nodes && self.directed == other.directed && self.edges == other.edges
    }
}

impl LayerGraph {
    pub fn new(n_nodes: usize, directed: bool) -> Self {
        Self {
            n_nodes,
            directed,
            edges: Vec::new(),
            in_adj: vec![Vec::new(); n_nodes],
            out_deg: vec![0; n_nodes],
            index: HashSet::new(),
        }
    }

    pub fn from_edges(
        n_nodes: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut g = Self::new(n_nodes, directed);
        for (s, d) in edges {
            g.add_edge(s, d, 1.0)?;
        }
        Ok(g)
    }

    fn key(&self, src: usize, dst: usize) -> (usize, usize) {
        if self.directed {
            (src, dst)
        } else {
            (src.min(dst), src.max(dst))
        }
    }

    pub fn add_edge(&mut self, src: usize, dst: usize, weight: f64) -> Result<()> {
        if src >= self.n_nodes || dst >= self.n_nodes {
            return Err(Error::InvalidNetwork(format!(
                "edge {src} -> {dst} out of range for {} nodes",
                self.n_nodes
            )));
        }
        if src == dst {
            return Err(Error::InvalidNetwork(format!("self-loop on node {src}")));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidNetwork(format!("edge {src} -> {dst} has weight {weight}")));
        }
        if !self.index.insert(self.key(src, dst)) {
            return Err(Error::DuplicateEdge { src, dst });
        }
        self.edges.push(Edge { src, dst, weight });
        self.in_adj[dst].push((src, weight));
        self.out_deg[src] += 1;
        if !self.directed {
            self.in_adj[src].push((dst, weight));
            self.out_deg[dst] += 1;
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.index.contains(&self.key(src, dst))
    }

    /// In-neighbours of `node` with edge weights; all neighbours when undirected.
    pub fn in_neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.in_adj[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_adj[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_deg[node]
    }

    /// Row-major dense adjacency; undirected edges are written at both
    /// `(i, j)` and `(j, i)`.
    pub fn adjacency_dense(&self) -> Vec<f64> {
        let n = self.n_nodes;
        let mut a = vec![0.0; n * n];
        for e in &self.edges {
            a[e.src * n + e.dst] = e.weight;
            if !self.directed {
                a[e.dst * n + e.src] = e.weight;
            }
        }
        a
    }

    /// Same graph with node `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let mut g = Self::new(self.n_nodes, self.directed);
        for e in &self.edges {
            g.add_edge(perm[e.src], perm[e.dst], e.weight)?;
        }
        Ok(g)
    }

    /// Copy of the graph without the listed edges (matched by orientation
    /// for directed graphs, unordered otherwise).
    pub fn without_edges(&self, removed: &[(usize, usize)]) -> Result<Self> {
        let drop: HashSet<(usize, usize)> = removed.iter().map(|&(s, d)| self.key(s, d)).collect();
        let mut g = Self::new(self.n_nodes, self.directed);
        for e in &self.edges {
            if !drop.contains(&self.key(e.src, e.dst)) {
                g.add_edge(e.src, e.dst, e.weight)?;
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterEdge {
    pub src: Replica,
    pub dst: Replica,
    pub weight: f64,
}

/// How the inter-layer edge set is populated.
#[derive(Clone, Debug, PartialEq)]
pub enum InterlayerPolicy {
    /// All replicas of each node form a clique with the given weight.
    MultiplexClique(f64),
    Explicit(Vec<InterEdge>),
}

/// Per-replica input features, `N·L` rows of equal width in flat replica order.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaFeatures {
    dim: usize,
    data: Vec<f64>,
}

impl ReplicaFeatures {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidNetwork(format!(
                "feature buffer of length {} is not a multiple of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.dim..(flat + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `N` nodes over `L` layers plus explicit inter-layer edges.
///
/// Inter-layer edges are undirected and always join replicas in distinct
/// layers. Once built a network is only read; it is `Send + Sync`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultilayerNetwork {
    n_nodes: usize,
    layers: Vec<LayerGraph>,
    layer_names: Vec<String>,
    inter_edges: Vec<InterEdge>,
    inter_index: HashSet<(Replica, Replica)>,
    features: Option<ReplicaFeatures>,
}

impl MultilayerNetwork {
    pub fn new(n_nodes: usize, layers: Vec<LayerGraph>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidNetwork("network needs at least one node".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network needs at least one layer".into()));
        }
        if let Some((a, g)) = layers.iter().enumerate().find(|(_, g)| g.n_nodes() != n_nodes) {
            return Err(Error::InvalidNetwork(format!(
                "layer {a} has {} nodes, expected {n_nodes}",
                g.n_nodes()
            )));
        }
        let layer_names = (0..layers.len()).map(|a| format!("l{a}")).collect();
        Ok(Self {
            n_nodes,
            layers,
            layer_names,
            inter_edges: Vec::new(),
            inter_index: HashSet::new(),
            features: None,
        })
    }

    pub fn with_layer_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.layers.len() {
            return Err(Error::InvalidNetwork(format!(
                "{} layer names for {} layers",
                names.len(),
                self.layers.len()
            )));
        }
        self.layer_names = names;
        Ok(self)
    }

    pub fn add_inter_edge(&mut self, a: Replica, b: Replica, weight: f64) -> Result<()> {
        for r in [a, b] {
            if r.node >= self.n_nodes || r.layer >= self.layers.len() {
                return Err(Error::InvalidNetwork(format!(
                    "replica ({}, {}) out of range",
                    r.node, r.layer
                )));
            }
        }
        if a.layer == b.layer {
            return Err(Error::InvalidNetwork(format!(
                "inter-layer edge ({}, {}) -- ({}, {}) stays inside one layer",
                a.node, a.layer, b.node, b.layer
            )));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidNetwork(format!("inter-layer weight {weight}")));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if !self.inter_index.insert(key) {
            return Err(Error::DuplicateInterEdge(a.node, a.layer, b.node, b.layer));
        }
        self.inter_edges.push(InterEdge { src: a, dst: b, weight });
        Ok(())
    }

    pub fn with_features(mut self, features: ReplicaFeatures) -> Result<Self> {
        if features.rows() != self.n_replicas() {
            return Err(Error::InvalidNetwork(format!(
                "{} feature rows for {} replicas",
                features.rows(),
                self.n_replicas()
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Couples every pair of replicas of each node with an undirected edge.
    pub fn build_multiplex_clique(mut self, weight: f64) -> Result<Self> {
        if !self.inter_edges.is_empty() {
            return Err(Error::InterEdgesPresent);
        }
        let l = self.layers.len();
        for node in 0..self.n_nodes {
            for a in 0..l {
                for b in a + 1..l {
                    self.add_inter_edge(Replica::new(node, a), Replica::new(node, b), weight)?;
                }
            }
        }
        Ok(self)
    }

    pub fn apply_interlayer(self, policy: &InterlayerPolicy) -> Result<Self> {
        match policy {
            InterlayerPolicy::MultiplexClique(w) => self.build_multiplex_clique(*w),
            InterlayerPolicy::Explicit(edges) => {
                if !self.inter_edges.is_empty() {
                    return Err(Error::InterEdgesPresent);
                }
                let mut net = self;
                for e in edges {
                    net.add_inter_edge(e.src, e.dst, e.weight)?;
                }
                Ok(net)
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_replicas(&self) -> usize {
        self.n_nodes * self.layers.len()
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn layer(&self, a: LayerId) -> &LayerGraph {
        &self.layers[a]
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn inter_edges(&self) -> &[InterEdge] {
        &self.inter_edges
    }

    pub fn features(&self) -> Option<&ReplicaFeatures> {
        self.features.as_ref()
    }

    pub fn is_undirected(&self) -> bool {
        self.layers.iter().all(|g| !g.is_directed())
    }

    /// Intra-layer weight vector `(W_ij^(1), ..., W_ij^(L))`.
    pub fn edge_weights(&self, i: NodeId, j: NodeId) -> Vec<f64> {
        self.layers
            .iter()
            .map(|g| {
                g.in_neighbors(j)
                    .iter()
                    .find(|&&(s, _)| s == i)
                    .map_or(0.0, |&(_, w)| w)
            })
            .collect()
    }

    /// Replaces layer `a`, keeping everything else.
    pub fn with_layer(&self, a: LayerId, layer: LayerGraph) -> Result<Self> {
        if layer.n_nodes() != self.n_nodes {
            return Err(Error::InvalidNetwork("replacement layer has the wrong node count".into()));
        }
        let mut net = self.clone();
        net.layers[a] = layer;
        Ok(net)
    }

    /// Renames node `i` to `perm[i]` in every layer, inter-edge and feature row.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_nodes)?;
        let layers = self.layers.iter().map(|g| g.relabeled(perm)).collect::<Result<Vec<_>>>()?;
        let mut net = Self::new(self.n_nodes, layers)?.with_layer_names(self.layer_names.clone())?;
        for e in &self.inter_edges {
            net.add_inter_edge(
                Replica::new(perm[e.src.node], e.src.layer),
                Replica::new(perm[e.dst.node], e.dst.layer),
                e.weight,
            )?;
        }
        if let Some(f) = &self.features {
            let n = self.n_nodes;
            let mut data = vec![0.0; f.data.len()];
            for flat in 0..self.n_replicas() {
                let r = Replica::from_flat(flat, n);
                let to = Replica::new(perm[r.node], r.layer).flat(n);
                data[to * f.dim..(to + 1) * f.dim].copy_from_slice(f.row(flat));
            }
            net = net.with_features(ReplicaFeatures::new(f.dim, data)?)?;
        }
        Ok(net)
    }

    /// Splits the network into `L` intra-layer graphs plus one inter-layer
    /// graph, all indexed by flat replica id.
    pub fn explode(&self) -> Exploded {
        let n = self.n_nodes;
        let total = self.n_replicas();
        let intra = self
            .layers
            .iter()
            .enumerate()
            .map(|(a, g)| {
                let mut out = LayerGraph::new(total, g.is_directed());
                for e in g.edges() {
                    out.add_edge(a * n + e.src, a * n + e.dst, e.weight)
                        .expect("re-indexing a valid layer cannot fail");
                }
                out
            })
            .collect();
        let mut inter = LayerGraph::new(total, false);
        for e in &self.inter_edges {
            inter
                .add_edge(e.src.flat(n), e.dst.flat(n), e.weight)
                .expect("inter edges are unique and cross layers");
        }
        Exploded { n_nodes: n, intra, inter }
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!("permutation of length {} for {n} nodes", perm.len())));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// The `L + 1` graphs a network explodes into.
#[derive(Clone, Debug)]
pub struct Exploded {
    pub n_nodes: usize,
    pub intra: Vec<LayerGraph>,
    pub inter: LayerGraph,
}

impl Exploded {
    pub fn n_layers(&self) -> usize {
        self.intra.len()
    }

    pub fn n_replicas(&self) -> usize {
        self.inter.n_nodes()
    }

    pub fn total_edges(&self) -> usize {
        self.intra.iter().map(LayerGraph::n_edges).sum::<usize>() + self.inter.n_edges()
    }
}

/// Maps arbitrary class names to dense ids in sorted order.
pub fn class_index(labels: &[String]) -> (Vec<String>, HashMap<String, usize>) {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    let map = names.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    (names, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn empty(n: usize, l: usize) -> MultilayerNetwork {
        MultilayerNetwork::new(n, (0..l).map(|_| LayerGraph::new(n, false)).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn flatten_round_trip(n in 1usize..40, l in 1usize..8, seed in any::<u64>()) {
            let node = (seed as usize) % n;
            let layer = (seed as usize / 7) % l;
            let r = Replica::new(node, layer);
            let flat = r.flat(n);
            prop_assert_eq!(Replica::from_flat(flat, n), r);
            prop_assert!(flat >= layer * n && flat < (layer + 1) * n);
        }
    }

    #[test]
    fn clique_counts() {
        assert_eq!(empty(3, 2).build_multiplex_clique(1.0).unwrap().inter_edges().len(), 3);
        assert_eq!(empty(1, 4).build_multiplex_clique(1.0).unwrap().inter_edges().len(), 6);
        assert_eq!(empty(307, 9).build_multiplex_clique(1.0).unwrap().inter_edges().len(), 11052);
    }

    #[test]
    fn clique_twice_is_rejected() {
        let net = empty(3, 2).build_multiplex_clique(1.0).unwrap();
        assert!(matches!(net.build_multiplex_clique(1.0), Err(Error::InterEdgesPresent)));
    }

    #[test]
    fn duplicate_edges_rejected() {
        let mut g = LayerGraph::new(3, false);
        g.add_edge(0, 1, 1.0).unwrap();
        assert!(g.add_edge(1, 0, 1.0).is_err());
        let mut d = LayerGraph::new(3, true);
        d.add_edge(0, 1, 1.0).unwrap();
        d.add_edge(1, 0, 1.0).unwrap();
        assert!(d.add_edge(0, 1, 2.0).is_err());
        assert!(g.add_edge(2, 2, 1.0).is_err());
        assert!(g.add_edge(0, 2, 0.0).is_err());
        assert!(g.add_edge(0, 3, 1.0).is_err());
    }

    #[test]
    fn undirected_neighbourhood_is_symmetric() {
        let g = LayerGraph::from_edges(3, false, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.in_neighbors(1).len(), 2);
        assert_eq!(g.in_neighbors(0), &[(1, 1.0)]);
        let d = LayerGraph::from_edges(3, true, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(d.in_neighbors(0).len(), 0);
        assert_eq!(d.in_neighbors(1), &[(0, 1.0)]);
    }

    #[test]
    fn inter_edges_must_cross_layers() {
        let mut net = empty(2, 2);
        assert!(net.add_inter_edge(Replica::new(0, 0), Replica::new(1, 0), 1.0).is_err());
        net.add_inter_edge(Replica::new(0, 0), Replica::new(1, 1), 1.0).unwrap();
        assert!(net.add_inter_edge(Replica::new(1, 1), Replica::new(0, 0), 1.0).is_err());
    }

    #[test]
    fn explode_monoplex() {
        let g = LayerGraph::from_edges(4, false, [(0, 1), (2, 3)]).unwrap();
        let net = MultilayerNetwork::new(4, vec![g.clone()]).unwrap();
        let ex = net.explode();
        assert_eq!(ex.intra.len(), 1);
        assert_eq!(ex.intra[0], g);
        assert_eq!(ex.inter.n_edges(), 0);
    }

    #[test]
    fn explode_partitions_edges() {
        // three-layer multiplex shaped like the running example: 4 nodes
        let l0 = LayerGraph::from_edges(4, false, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let l1 = LayerGraph::from_edges(4, false, [(0, 2), (1, 3)]).unwrap();
        let l2 = LayerGraph::from_edges(4, false, [(0, 3)]).unwrap();
        let net = MultilayerNetwork::new(4, vec![l0, l1, l2]).unwrap().build_multiplex_clique(1.0).unwrap();
        let ex = net.explode();
        assert_eq!(ex.intra.len() + 1, 4);
        assert_eq!(ex.total_edges(), 3 + 2 + 1 + 12);
        // layer 1 edge (0,2) lands in block 1
        assert!(ex.intra[1].has_edge(4, 6));
        assert!(ex.inter.has_edge(0, 4) && ex.inter.has_edge(4, 8) && ex.inter.has_edge(0, 8));
    }

    #[test]
    fn relabel_moves_features() {
        let g = LayerGraph::from_edges(3, false, [(0, 1)]).unwrap();
        let f = ReplicaFeatures::new(1, vec![0.0, 1.0, 2.0]).unwrap();
        let net = MultilayerNetwork::new(3, vec![g]).unwrap().with_features(f).unwrap();
        let p = net.relabeled(&[2, 0, 1]).unwrap();
        assert!(p.layer(0).has_edge(2, 0));
        assert_eq!(p.features().unwrap().data(), &[1.0, 2.0, 0.0]);
        assert!(net.relabeled(&[0, 0, 1]).is_err());
    }
}
