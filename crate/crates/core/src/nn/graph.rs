//! Message-passing indices over flat replica ids, and input features.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::mlgraph::{LayerGraph, MultilayerNetwork};
use crate::tensor::Tensor;

/// Edge list in message direction (`src` sends to `dst`), self-loops
/// included. Attention normalizes over entries that share a `dst`.
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    n_rows: usize,
    src: Rc<[usize]>,
    dst: Rc<[usize]>,
}

impl EdgeIndex {
    /// Messages along every edge of `graphs` (both directions for undirected
    /// graphs, `src -> dst` otherwise), plus a self-loop on each row in
    /// `loops`.
    pub fn build(n_rows: usize, graphs: &[&LayerGraph], loops: std::ops::Range<usize>) -> Self {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for g in graphs {
            for e in g.edges() {
                src.push(e.src);
                dst.push(e.dst);
                if !g.is_directed() {
                    src.push(e.dst);
                    dst.push(e.src);
                }
            }
        }
        src.extend(loops.clone());
        dst.extend(loops);
        Self { n_rows, src: src.into(), dst: dst.into() }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_entries(&self) -> usize {
        self.src.len()
    }

    pub fn src(&self) -> &Rc<[usize]> {
        &self.src
    }

    pub fn dst(&self) -> &Rc<[usize]> {
        &self.dst
    }

    fn shifted(parts: &[(&EdgeIndex, usize)], n_rows: usize) -> Self {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (idx, off) in parts {
            src.extend(idx.src.iter().map(|s| s + off));
            dst.extend(idx.dst.iter().map(|d| d + off));
        }
        Self { n_rows, src: src.into(), dst: dst.into() }
    }
}

/// The exploded view of one network (or a disjoint union of several) as
/// message-passing indices.
#[derive(Clone, Debug)]
pub struct SupraGraph {
    n_nodes: usize,
    n_layers: usize,
    n_rows: usize,
    /// One index per layer; self-loops only on that layer's rows.
    per_layer: Vec<EdgeIndex>,
    /// All intra-layer edges, self-loops on every row.
    intra: EdgeIndex,
    inter: EdgeIndex,
}

impl SupraGraph {
    pub fn new(net: &MultilayerNetwork) -> Self {
        let ex = net.explode();
        let n = ex.n_nodes;
        let rows = ex.n_replicas();
        let per_layer = ex
            .intra
            .iter()
            .enumerate()
            .map(|(a, g)| EdgeIndex::build(rows, &[g], a * n..(a + 1) * n))
            .collect();
        let all: Vec<&LayerGraph> = ex.intra.iter().collect();
        Self {
            n_nodes: n,
            n_layers: ex.n_layers(),
            n_rows: rows,
            per_layer,
            intra: EdgeIndex::build(rows, &all, 0..rows),
            inter: EdgeIndex::build(rows, &[&ex.inter], 0..rows),
        }
    }

    /// Disjoint union; rows of graph `k` follow those of graph `k - 1`.
    /// Returns the graph id of every row. All parts must have the same
    /// number of layers.
    pub fn batch(parts: &[&SupraGraph]) -> (SupraGraph, Rc<[usize]>) {
        assert!(!parts.is_empty(), "empty batch");
        let n_layers = parts[0].n_layers;
        assert!(parts.iter().all(|p| p.n_layers == n_layers), "layer count differs within batch");
        let mut offsets = Vec::with_capacity(parts.len());
        let mut rows = 0;
        let mut graph_of = Vec::new();
        for (k, p) in parts.iter().enumerate() {
            offsets.push(rows);
            rows += p.n_rows;
            graph_of.extend(std::iter::repeat_n(k, p.n_rows));
        }
        let join = |pick: &dyn Fn(&SupraGraph) -> &EdgeIndex| {
            let v: Vec<(&EdgeIndex, usize)> = parts.iter().zip(&offsets).map(|(p, &o)| (pick(p), o)).collect();
            EdgeIndex::shifted(&v, rows)
        };
        let per_layer = (0..n_layers).map(|a| join(&|p| &p.per_layer[a])).collect();
        let g = SupraGraph {
            n_nodes: if parts.len() == 1 { parts[0].n_nodes } else { 0 },
            n_layers,
            n_rows: rows,
            per_layer,
            intra: join(&|p| &p.intra),
            inter: join(&|p| &p.inter),
        };
        (g, graph_of.into())
    }

    /// Nodes per layer; zero for a batch of several networks.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn intra(&self) -> &EdgeIndex {
        &self.intra
    }

    pub fn layer(&self, a: usize) -> &EdgeIndex {
        &self.per_layer[a]
    }

    pub fn inter(&self) -> &EdgeIndex {
        &self.inter
    }
}

/// What to feed a network that carries no features of its own.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// A single constant 1 per replica.
    Constant,
    /// `[1, ln(1 + in-degree), ln(1 + out-degree)]` within the replica's layer.
    #[default]
    Degree,
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::Constant => 1,
            FeatureMode::Degree => 3,
        }
    }
}

/// Input width for `net` under `mode`; stored features take precedence.
pub fn input_width(net: &MultilayerNetwork, mode: FeatureMode) -> usize {
    net.features().map_or(mode.width(), |f| f.dim())
}

/// `NL × F` input matrix in flat replica order.
pub fn input_features(net: &MultilayerNetwork, mode: FeatureMode) -> Tensor {
    let rows = net.n_replicas();
    if let Some(f) = net.features() {
        return Tensor::new(rows, f.dim(), f.data().to_vec()).expect("features cover every replica");
    }
    match mode {
        FeatureMode::Constant => Tensor::full(rows, 1, 1.0),
        FeatureMode::Degree => {
            let mut data = Vec::with_capacity(rows * 3);
            for g in net.layers() {
                for i in 0..net.n_nodes() {
                    data.extend([1.0, (g.in_degree(i) as f64).ln_1p(), (g.out_degree(i) as f64).ln_1p()]);
                }
            }
            Tensor::new(rows, 3, data).expect("non-empty network")
        }
    }
}

/// Per-column affine map `(x - mean) / scale` fitted on training inputs.
/// Columns without variance (such as the constant 1) pass through unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(cols: usize) -> Self {
        Self { mean: vec![0.0; cols], scale: vec![1.0; cols] }
    }

    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let (mut n, mut sum, mut sq) = (0usize, Vec::new(), Vec::new());
        for t in inputs {
            if sum.is_empty() {
                sum = vec![0.0; t.cols()];
                sq = vec![0.0; t.cols()];
            }
            for r in 0..t.rows() {
                for (c, &v) in t.row(r).iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            n += t.rows();
        }
        let n = n.max(1) as f64;
        let mut out = Self::identity(sum.len());
        for c in 0..sum.len() {
            let mean = sum[c] / n;
            let var = (sq[c] / n - mean * mean).max(0.0);
            if var > 1e-12 * (1.0 + mean * mean) {
                out.mean[c] = mean;
                out.scale[c] = var.sqrt();
            }
        }
        out
    }

    pub fn apply(&self, t: &mut Tensor) -> Result<()> {
        let cols = t.cols();
        if cols != self.mean.len() {
            return shape_err("standardize", format!("{cols} columns, fitted on {}", self.mean.len()));
        }
        for row in t.data_mut().chunks_exact_mut(cols) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        Ok(())
    }
}
