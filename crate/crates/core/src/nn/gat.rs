use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::EdgeIndex;
use crate::error::{shape_err, Result};
use crate::tensor::{ParamId, ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub in_dim: usize,
    /// Output features per head.
    pub head_dim: usize,
    pub heads: usize,
    pub negative_slope: f64,
}

impl GatConfig {
    pub fn out_dim(&self) -> usize {
        self.heads * self.head_dim
    }
}

/// Multi-head graph attention with concatenated heads and no bias.
///
/// Per head `h`, a replica `i` attends over its message sources `j`
/// (in-neighbours and itself):
///
/// ```text
/// e_ij = LeakyReLU(a_dst·W h_i + a_src·W h_j)
/// out_i = Σ_j softmax_j(e_ij) W h_j
/// ```
///
/// `[a_dst ‖ a_src]` is the usual single `2F` attention vector, stored as two
/// `heads × F` parameters.
#[derive(Clone, Debug)]
pub struct Gat {
    cfg: GatConfig,
    w: ParamId,
    att_src: ParamId,
    att_dst: ParamId,
}

impl Gat {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, cfg: GatConfig, rng: &mut R) -> Result<Self> {
        if cfg.in_dim == 0 || cfg.head_dim == 0 || cfg.heads == 0 {
            return shape_err("gat", format!("degenerate config {cfg:?}"));
        }
        let w = store.glorot(format!("{prefix}.w"), cfg.in_dim, cfg.out_dim(), rng)?;
        let att_src = store.glorot(format!("{prefix}.att_src"), cfg.heads, cfg.head_dim, rng)?;
        let att_dst = store.glorot(format!("{prefix}.att_dst"), cfg.heads, cfg.head_dim, rng)?;
        Ok(Self { cfg, w, att_src, att_dst })
    }

    pub fn config(&self) -> &GatConfig {
        &self.cfg
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn att_src(&self) -> ParamId {
        self.att_src
    }

    pub fn att_dst(&self) -> ParamId {
        self.att_dst
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, edges: &EdgeIndex) -> Result<Var> {
        Ok(self.forward_with_attention(tape, store, x, edges)?.0)
    }

    /// Also returns the `E × heads` attention coefficients, row-aligned with
    /// `edges`.
    pub fn forward_with_attention(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        edges: &EdgeIndex,
    ) -> Result<(Var, Var)> {
        let (rows, width) = tape.shape(x);
        if width != self.cfg.in_dim || rows != edges.n_rows() {
            return shape_err(
                "gat",
                format!("input {rows}x{width}, expected {}x{}", edges.n_rows(), self.cfg.in_dim),
            );
        }
        let heads = self.cfg.heads;
        let w = tape.param(store, self.w);
        let wh = tape.matmul(x, w)?;
        let a_src = tape.param(store, self.att_src);
        let a_dst = tape.param(store, self.att_dst);
        let s_src = tape.head_dot(wh, a_src, heads)?;
        let s_dst = tape.head_dot(wh, a_dst, heads)?;
        let e_src = tape.gather_rows(s_src, edges.src())?;
        let e_dst = tape.gather_rows(s_dst, edges.dst())?;
        let e = tape.add(e_src, e_dst)?;
        let e = tape.leaky_relu(e, self.cfg.negative_slope);
        let alpha = tape.segment_softmax(e, edges.dst(), rows)?;
        let msg = tape.gather_rows(wh, edges.src())?;
        let msg = tape.head_scale(msg, alpha, heads)?;
        let out = tape.scatter_add_rows(msg, edges.dst(), rows)?;
        tape.record_edge_visits(edges.n_entries());
        Ok((out, alpha))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mlgraph::LayerGraph;
    use crate::tensor::{param_grad_check, Tensor};

    fn cfg(in_dim: usize, head_dim: usize, heads: usize) -> GatConfig {
        GatConfig { in_dim, head_dim, heads, negative_slope: 0.2 }
    }

    fn run(gat: &Gat, store: &ParamStore, x: &Tensor, edges: &EdgeIndex) -> Tensor {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = gat.forward(&mut tape, store, xv, edges).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn zero_attention_averages_neighbourhood() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(2, 3, 2), &mut rng).unwrap();
        store.set_value(gat.att_src, Tensor::zeros(2, 3)).unwrap();
        store.set_value(gat.att_dst, Tensor::zeros(2, 3)).unwrap();
        let g = LayerGraph::from_edges(4, false, [(0, 1), (0, 2), (2, 3)]).unwrap();
        let edges = EdgeIndex::build(4, &[&g], 0..4);
        let x = Tensor::new(4, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0, 0.25, -2.0]).unwrap();
        let out = run(&gat, &store, &x, &edges);
        let wh = x.matmul(store.value(gat.w)).unwrap();
        let hood: [&[usize]; 4] = [&[0, 1, 2], &[0, 1], &[0, 2, 3], &[2, 3]];
        for (i, nb) in hood.iter().enumerate() {
            for c in 0..6 {
                let mean = nb.iter().map(|&j| wh.get(j, c)).sum::<f64>() / nb.len() as f64;
                assert!((out.get(i, c) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeless_graph_is_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(3, 2, 3), &mut rng).unwrap();
        let g = LayerGraph::new(5, false);
        let x = Tensor::new(5, 3, (0..15).map(|v| v as f64 * 0.1 - 0.7).collect()).unwrap();
        let out = run(&gat, &store, &x, &EdgeIndex::build(5, &[&g], 0..5));
        assert_eq!(out, x.matmul(store.value(gat.w)).unwrap());
    }

    #[test]
    fn line_graph_by_hand() {
        // 0 - 1 - 2, one head, scalar features, W = [2], a_dst = [0.5], a_src = [-1]
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(1, 1, 1), &mut rng).unwrap();
        store.set_value(gat.w, Tensor::scalar(2.0)).unwrap();
        store.set_value(gat.att_dst, Tensor::scalar(0.5)).unwrap();
        store.set_value(gat.att_src, Tensor::scalar(-1.0)).unwrap();
        let g = LayerGraph::from_edges(3, false, [(0, 1), (1, 2)]).unwrap();
        let x = Tensor::column(vec![1.0, -0.5, 0.3]);
        let out = run(&gat, &store, &x, &EdgeIndex::build(3, &[&g], 0..3));

        let wh: Vec<f64> = x.data().iter().map(|v| 2.0 * v).collect();
        let leaky = |v: f64| if v > 0.0 { v } else { 0.2 * v };
        let hood: [&[usize]; 3] = [&[0, 1], &[0, 1, 2], &[1, 2]];
        for (i, nb) in hood.iter().enumerate() {
            let e: Vec<f64> = nb.iter().map(|&j| leaky(0.5 * wh[i] - wh[j])).collect();
            let z: f64 = e.iter().map(|v| v.exp()).sum();
            let expect: f64 = nb.iter().zip(&e).map(|(&j, ej)| ej.exp() / z * wh[j]).sum();
            assert!((out.get(i, 0) - expect).abs() < 1e-12, "{i}: {} vs {expect}", out.get(i, 0));
        }
    }

    #[test]
    fn attention_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(2, 2, 4), &mut rng).unwrap();
        let g = LayerGraph::from_edges(6, true, [(0, 1), (2, 1), (3, 1), (4, 5), (5, 4), (1, 0)]).unwrap();
        let edges = EdgeIndex::build(6, &[&g], 0..6);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(6, 2, (0..12).map(|v| (v as f64).sin() * 5.0).collect()).unwrap());
        let (_, alpha) = gat.forward_with_attention(&mut tape, &store, x, &edges).unwrap();
        let a = tape.value(alpha);
        for i in 0..6 {
            for h in 0..4 {
                let s: f64 = edges.dst().iter().enumerate().filter(|(_, &d)| d == i).map(|(e, _)| a.get(e, h)).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(3, 2, 2), &mut rng).unwrap();
        let g = LayerGraph::from_edges(5, false, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let edges = EdgeIndex::build(5, &[&g], 0..5);
        let x = Tensor::new(5, 3, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let err = param_grad_check(
            &store,
            |tape, s| {
                let xv = tape.constant(x.clone());
                let out = gat.forward(tape, s, xv, &edges)?;
                let sq = tape.mul(out, out)?;
                Ok(tape.sum(sq))
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let gat = Gat::new(&mut store, "g", cfg(3, 2, 2), &mut rng).unwrap();
        let g = LayerGraph::new(2, false);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(2, 4));
        assert!(gat.forward(&mut tape, &store, x, &EdgeIndex::build(2, &[&g], 0..2)).is_err());
    }
}
