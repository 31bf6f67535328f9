//! Task models: a supra-layer stack plus a task-specific readout.

use std::rc::Rc;

use rand::{Rng, RngCore};

use super::graph::SupraGraph;
use super::readout::{replica_aggregate, LinkScorer, Mlp, ReplicaMode, SoftAttentionPool};
use super::supra::{Mgnn, MgnnConfig};
use crate::error::{shape_err, Result};
use crate::tensor::{ParamStore, Tape, Var};

/// Per-node class logits from the concatenated replica embeddings.
#[derive(Clone, Debug)]
pub struct NodeClassifier {
    pub body: Mgnn,
    pub head: Mlp,
}

impl NodeClassifier {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: MgnnConfig,
        hidden: &[usize],
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = vec![cfg.n_layers * cfg.out_dim()];
        widths.extend_from_slice(hidden);
        widths.push(n_classes);
        let body = Mgnn::new(store, "body", cfg, rng)?;
        let head = Mlp::new(store, "head", &widths, rng)?;
        Ok(Self { body, head })
    }

    /// `N × C` logits.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SupraGraph,
        x: Var,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let h = self.body.forward(tape, store, graph, x, rng)?;
        let h = tape.elu(h);
        let r = replica_aggregate(tape, h, graph.n_nodes(), graph.n_layers(), ReplicaMode::Concat)?;
        self.head.forward(tape, store, r)
    }
}

/// Link probabilities from the target layer's replica embeddings.
#[derive(Clone, Debug)]
pub struct LinkPredictor {
    pub body: Mgnn,
    pub scorer: LinkScorer,
    pub target_layer: usize,
}

impl LinkPredictor {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: MgnnConfig,
        hidden: &[usize],
        target_layer: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = cfg.out_dim();
        let body = Mgnn::new(store, "body", cfg, rng)?;
        let scorer = LinkScorer::new(store, "link", d, hidden, rng)?;
        Ok(Self { body, scorer, target_layer })
    }

    /// Node embeddings (`N × D`) of the target layer.
    pub fn embed(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SupraGraph,
        x: Var,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let n = graph.n_nodes();
        if self.target_layer >= graph.n_layers() {
            return shape_err("link_predictor", format!("target layer {} of {}", self.target_layer, graph.n_layers()));
        }
        let h = self.body.forward(tape, store, graph, x, rng)?;
        let h = tape.elu(h);
        let rows: Rc<[usize]> = (self.target_layer * n..(self.target_layer + 1) * n).collect();
        tape.gather_rows(h, &rows)
    }

    /// `P × 1` probabilities for the pairs `(left[k], right[k])`.
    pub fn score(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        emb: Var,
        left: &Rc<[usize]>,
        right: &Rc<[usize]>,
    ) -> Result<Var> {
        self.scorer.forward(tape, store, emb, left, right)
    }
}

/// One probability per graph: attention pooling to a scalar, then sigmoid.
#[derive(Clone, Debug)]
pub struct GraphClassifier {
    pub body: Mgnn,
    pub pool: SoftAttentionPool,
}

impl GraphClassifier {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, cfg: MgnnConfig, rng: &mut R) -> Result<Self> {
        let d = cfg.out_dim();
        let body = Mgnn::new(store, "body", cfg, rng)?;
        let pool = SoftAttentionPool::new(store, "pool", d, 1, rng)?;
        Ok(Self { body, pool })
    }

    /// `G × 1` probabilities for a batch built by [`SupraGraph::batch`].
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SupraGraph,
        graph_of: &Rc<[usize]>,
        n_graphs: usize,
        x: Var,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let h = self.body.forward(tape, store, graph, x, rng)?;
        let h = tape.elu(h);
        let p = self.pool.forward(tape, store, h, graph_of, n_graphs)?;
        Ok(tape.sigmoid(p))
    }
}
