//! Dense layers, replica aggregation, attention pooling and the link scorer.

use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

/// `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    w: ParamId,
    b: ParamId,
    in_dim: usize,
    out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.glorot(format!("{prefix}.w"), in_dim, out_dim, rng)?;
        let b = store.zeros(format!("{prefix}.b"), 1, out_dim)?;
        Ok(Self { w, b, in_dim, out_dim })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> ParamId {
        self.b
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

/// Linear layers with ELU between them (none after the last).
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists every width from input to output, so it has at least
    /// two entries.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return shape_err("mlp", format!("needs input and output widths, got {widths:?}"));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::new(store, &format!("{prefix}.{k}"), w[0], w[1], rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                h = tape.elu(h);
            }
            h = layer.forward(tape, store, h)?;
        }
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplicaMode {
    Sum,
    Mean,
    /// Concatenate the `L` replica rows in layer order; the MLP is applied by
    /// the caller.
    Concat,
}

/// Collapses the `NL × F` replica matrix into one row per node.
///
/// `Sum`/`Mean` give `N × F`; `Concat` gives `N × LF`.
pub fn replica_aggregate(tape: &mut Tape, h: Var, n_nodes: usize, n_layers: usize, mode: ReplicaMode) -> Result<Var> {
    let (rows, _) = tape.shape(h);
    if rows != n_nodes * n_layers || n_nodes == 0 {
        return shape_err("replica_aggregate", format!("{rows} rows for {n_nodes} nodes x {n_layers} layers"));
    }
    let blocks = (0..n_layers)
        .map(|a| {
            let idx: Rc<[usize]> = (a * n_nodes..(a + 1) * n_nodes).collect();
            tape.gather_rows(h, &idx)
        })
        .collect::<Result<Vec<_>>>()?;
    match mode {
        ReplicaMode::Concat => tape.concat_cols(&blocks),
        ReplicaMode::Sum | ReplicaMode::Mean => {
            let mut acc = blocks[0];
            for &b in &blocks[1..] {
                acc = tape.add(acc, b)?;
            }
            Ok(if mode == ReplicaMode::Mean { tape.scale(acc, 1.0 / n_layers as f64) } else { acc })
        }
    }
}

/// Global soft-attention pooling: one gate score per replica, softmax over
/// the replicas of each graph, weighted sum of a linear transform.
#[derive(Clone, Debug)]
pub struct SoftAttentionPool {
    gate: Linear,
    transform: Linear,
}

impl SoftAttentionPool {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            gate: Linear::new(store, &format!("{prefix}.gate"), in_dim, 1, rng)?,
            transform: Linear::new(store, &format!("{prefix}.transform"), in_dim, out_dim, rng)?,
        })
    }

    pub fn gate(&self) -> &Linear {
        &self.gate
    }

    pub fn transform(&self) -> &Linear {
        &self.transform
    }

    /// `graph_of[r]` names the graph of replica row `r`; output is
    /// `n_graphs × out_dim`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        h: Var,
        graph_of: &Rc<[usize]>,
        n_graphs: usize,
    ) -> Result<Var> {
        let score = self.gate.forward(tape, store, h)?;
        let weight = tape.segment_softmax(score, graph_of, n_graphs)?;
        let t = self.transform.forward(tape, store, h)?;
        let t = tape.head_scale(t, weight, 1)?;
        tape.scatter_add_rows(t, graph_of, n_graphs)
    }
}

/// `sigmoid(MLP(r_i ‖ r_j))` for each requested pair.
#[derive(Clone, Debug)]
pub struct LinkScorer {
    mlp: Mlp,
}

impl LinkScorer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        emb_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = vec![2 * emb_dim];
        widths.extend_from_slice(hidden);
        widths.push(1);
        Ok(Self { mlp: Mlp::new(store, prefix, &widths, rng)? })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Probabilities as a `P × 1` column; `emb` holds one row per candidate
    /// endpoint.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, emb: Var, left: &Rc<[usize]>, right: &Rc<[usize]>) -> Result<Var> {
        if left.len() != right.len() {
            return shape_err("link_score", format!("{} left vs {} right endpoints", left.len(), right.len()));
        }
        let a = tape.gather_rows(emb, left)?;
        let b = tape.gather_rows(emb, right)?;
        let pair = tape.concat_cols(&[a, b])?;
        let logit = self.mlp.forward(tape, store, pair)?;
        Ok(tape.sigmoid(logit))
    }
}

/// Zeroes every parameter of `mlp` (used for null-model checks).
pub fn zero_mlp(store: &mut ParamStore, mlp: &Mlp) -> Result<()> {
    for l in mlp.layers() {
        store.set_value(l.w, Tensor::zeros(l.in_dim, l.out_dim))?;
        store.set_value(l.b, Tensor::zeros(1, l.out_dim))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::param_grad_check;

    fn rand_tensor(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::new(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn eval(f: impl FnOnce(&mut Tape) -> Var) -> Tensor {
        let mut tape = Tape::new();
        let v = f(&mut tape);
        tape.value(v).clone()
    }

    #[test]
    fn replica_modes() {
        // N = 2, L = 2: rows (0,0), (1,0), (0,1), (1,1)
        let h = Tensor::new(4, 2, vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0]).unwrap();
        let sum = eval(|t| {
            let x = t.constant(h.clone());
            replica_aggregate(t, x, 2, 2, ReplicaMode::Sum).unwrap()
        });
        assert_eq!(sum.data(), &[11.0, 22.0, 33.0, 44.0]);
        let cat = eval(|t| {
            let x = t.constant(h.clone());
            replica_aggregate(t, x, 2, 2, ReplicaMode::Concat).unwrap()
        });
        assert_eq!(cat.data(), &[1.0, 2.0, 10.0, 20.0, 3.0, 4.0, 30.0, 40.0]);

        let same = Tensor::new(6, 2, [0.3, -0.7].repeat(6)).unwrap();
        let mean = eval(|t| {
            let x = t.constant(same.clone());
            replica_aggregate(t, x, 2, 3, ReplicaMode::Mean).unwrap()
        });
        assert!(mean.data().chunks(2).all(|r| (r[0] - 0.3).abs() < 1e-15 && (r[1] + 0.7).abs() < 1e-15));

        let mut tape = Tape::new();
        let x = tape.constant(h);
        assert!(replica_aggregate(&mut tape, x, 3, 2, ReplicaMode::Sum).is_err());
    }

    #[test]
    fn concat_mlp_classifier_width() {
        // nine layers of 300-wide replica embeddings into six classes
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "clf", &[9 * 300, 64, 6], &mut rng).unwrap();
        let out = eval(|t| {
            let x = t.constant(Tensor::full(9 * 4, 300, 0.01));
            let r = replica_aggregate(t, x, 4, 9, ReplicaMode::Concat).unwrap();
            mlp.forward(t, &store, r).unwrap()
        });
        assert_eq!(out.shape(), (4, 6));
    }

    #[test]
    fn pooling_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let pool = SoftAttentionPool::new(&mut store, "pool", 3, 2, &mut rng).unwrap();
        store.set_value(pool.transform.b, Tensor::row_vector(vec![0.1, -0.2])).unwrap();
        let tw = store.value(pool.transform.w).clone();
        let transform = |row: &[f64]| -> Vec<f64> {
            (0..2).map(|c| [0.1, -0.2][c] + (0..3).map(|k| row[k] * tw.get(k, c)).sum::<f64>()).collect()
        };

        let single = vec![0.5, -1.0, 2.0];
        let out = eval(|t| {
            let x = t.constant(Tensor::row_vector(single.clone()));
            pool.forward(t, &store, x, &vec![0].into(), 1).unwrap()
        });
        let expect = transform(&single);
        assert!(out.data().iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-15));

        let out = eval(|t| {
            let x = t.constant(Tensor::new(5, 3, single.repeat(5)).unwrap());
            pool.forward(t, &store, x, &vec![0; 5].into(), 1).unwrap()
        });
        assert!(out.data().iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-14));

        let h = rand_tensor(4, 3, &mut rng);
        let gw = store.value(pool.gate.w).clone();
        let gate: Vec<f64> = (0..4).map(|r| (0..3).map(|k| h.get(r, k) * gw.get(k, 0)).sum()).collect();
        let z: f64 = gate.iter().map(|g| g.exp()).sum();
        let mut expect = [0.0; 2];
        for r in 0..4 {
            let t = transform(h.row(r));
            for c in 0..2 {
                expect[c] += gate[r].exp() / z * t[c];
            }
        }
        let out = eval(|t| {
            let x = t.constant(h.clone());
            pool.forward(t, &store, x, &vec![0; 4].into(), 1).unwrap()
        });
        assert!(out.data().iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn pooling_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let pool = SoftAttentionPool::new(&mut store, "pool", 4, 2, &mut rng).unwrap();
        let h = rand_tensor(6, 4, &mut rng);
        let graph_of: Rc<[usize]> = vec![0, 0, 1, 1, 1, 0].into();
        let err = param_grad_check(
            &store,
            |t, s| {
                let x = t.constant(h.clone());
                let p = pool.forward(t, s, x, &graph_of, 2)?;
                let sq = t.mul(p, p)?;
                Ok(t.sum(sq))
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn link_score_null_and_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let scorer = LinkScorer::new(&mut store, "link", 3, &[4], &mut rng).unwrap();
        let emb = rand_tensor(5, 3, &mut rng);
        let left: Rc<[usize]> = vec![0, 1, 2, 0].into();
        let right: Rc<[usize]> = vec![3, 4, 1, 3].into();
        let score = |s: &ParamStore| {
            eval(|t| {
                let e = t.constant(emb.clone());
                scorer.forward(t, s, e, &left, &right).unwrap()
            })
        };
        let p = score(&store);
        assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(p.data()[0].to_bits(), p.data()[3].to_bits());

        let err = param_grad_check(
            &store,
            |t, s| {
                let e = t.constant(emb.clone());
                let p = scorer.forward(t, s, e, &left, &right)?;
                t.bce_loss(p, &[1.0, 0.0, 1.0, 1.0])
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");

        zero_mlp(&mut store, scorer.mlp()).unwrap();
        assert!(score(&store).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mlp_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[4, 3, 2], &mut rng).unwrap();
        let x = rand_tensor(6, 4, &mut rng);
        let err = param_grad_check(
            &store,
            |t, s| {
                let xv = t.constant(x.clone());
                let y = mlp.forward(t, s, xv)?;
                t.weighted_cross_entropy(y, &[0, 1, 1, 0, 1, 1], &[1.5, 0.75])
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }
}
