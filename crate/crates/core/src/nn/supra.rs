//! The supra-layer: intra-layer and inter-layer attention run side by side
//! on the exploded network, then fused row-wise.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::gat::{Gat, GatConfig};
use super::graph::SupraGraph;
use super::readout::{Linear, Mlp};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregatorKind {
    Sum,
    Mean,
    #[default]
    ConcatLinear,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgnnConfig {
    pub in_dim: usize,
    pub head_dim: usize,
    pub heads: usize,
    pub supra_layers: usize,
    pub negative_slope: f64,
    /// Inverted dropout on every supra-layer input while training.
    pub dropout: f64,
    pub aggregator: AggregatorKind,
    /// Hidden width of the `Mlp` aggregator.
    pub aggregator_hidden: usize,
    /// One intra-layer GAT per network layer instead of a shared one.
    pub per_layer_intra: bool,
    pub n_layers: usize,
}

impl MgnnConfig {
    pub fn out_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.in_dim == 0 || self.head_dim == 0 || self.heads == 0 {
            return bad("in_dim, head_dim and heads must be positive");
        }
        if self.supra_layers == 0 {
            return bad("at least one supra-layer is required");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.negative_slope > 0.0 && self.negative_slope < 1.0) {
            return bad("negative_slope must lie in (0, 1)");
        }
        if self.n_layers == 0 {
            return bad("n_layers must be positive");
        }
        if self.aggregator == AggregatorKind::Mlp && self.aggregator_hidden == 0 {
            return bad("aggregator_hidden must be positive for the mlp aggregator");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum Aggregator {
    Sum,
    Mean,
    ConcatLinear(Linear),
    Mlp(Mlp),
}

impl Aggregator {
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, intra: Var, inter: Var) -> Result<Var> {
        match self {
            Aggregator::Sum => tape.add(intra, inter),
            Aggregator::Mean => {
                let s = tape.add(intra, inter)?;
                Ok(tape.scale(s, 0.5))
            }
            Aggregator::ConcatLinear(lin) => {
                let c = tape.concat_cols(&[intra, inter])?;
                lin.forward(tape, store, c)
            }
            Aggregator::Mlp(mlp) => {
                let c = tape.concat_cols(&[intra, inter])?;
                mlp.forward(tape, store, c)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum IntraGat {
    Shared(Gat),
    PerLayer(Vec<Gat>),
}

#[derive(Clone, Debug)]
pub struct SupraLayer {
    pub intra: IntraGat,
    pub inter: Gat,
    pub agg: Aggregator,
}

impl SupraLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        cfg: &MgnnConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let gat = GatConfig { in_dim, head_dim: cfg.head_dim, heads: cfg.heads, negative_slope: cfg.negative_slope };
        let intra = if cfg.per_layer_intra {
            IntraGat::PerLayer(
                (0..cfg.n_layers)
                    .map(|a| Gat::new(store, &format!("{prefix}.intra{a}"), gat, rng))
                    .collect::<Result<_>>()?,
            )
        } else {
            IntraGat::Shared(Gat::new(store, &format!("{prefix}.intra"), gat, rng)?)
        };
        let inter = Gat::new(store, &format!("{prefix}.inter"), gat, rng)?;
        let d = gat.out_dim();
        let agg = match cfg.aggregator {
            AggregatorKind::Sum => Aggregator::Sum,
            AggregatorKind::Mean => Aggregator::Mean,
            AggregatorKind::ConcatLinear => Aggregator::ConcatLinear(Linear::new(store, &format!("{prefix}.agg"), 2 * d, d, rng)?),
            AggregatorKind::Mlp => {
                Aggregator::Mlp(Mlp::new(store, &format!("{prefix}.agg"), &[2 * d, cfg.aggregator_hidden, d], rng)?)
            }
        };
        Ok(Self { intra, inter, agg })
    }

    /// Intra-layer branch only.
    pub fn intra_forward(&self, tape: &mut Tape, store: &ParamStore, graph: &SupraGraph, h: Var) -> Result<Var> {
        match &self.intra {
            IntraGat::Shared(g) => g.forward(tape, store, h, graph.intra()),
            IntraGat::PerLayer(gats) => {
                if gats.len() != graph.n_layers() {
                    return shape_err("supra_layer", format!("{} intra GATs for {} layers", gats.len(), graph.n_layers()));
                }
                // each output is zero outside its own layer's rows
                let mut acc = gats[0].forward(tape, store, h, graph.layer(0))?;
                for (a, g) in gats.iter().enumerate().skip(1) {
                    let part = g.forward(tape, store, h, graph.layer(a))?;
                    acc = tape.add(acc, part)?;
                }
                Ok(acc)
            }
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, graph: &SupraGraph, h: Var) -> Result<Var> {
        let intra = self.intra_forward(tape, store, graph, h)?;
        let inter = self.inter.forward(tape, store, h, graph.inter())?;
        self.agg.forward(tape, store, intra, inter)
    }
}

/// A stack of supra-layers with ELU between consecutive layers.
#[derive(Clone, Debug)]
pub struct Mgnn {
    cfg: MgnnConfig,
    layers: Vec<SupraLayer>,
}

impl Mgnn {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, cfg: MgnnConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.supra_layers);
        for k in 0..cfg.supra_layers {
            let in_dim = if k == 0 { cfg.in_dim } else { cfg.out_dim() };
            layers.push(SupraLayer::new(store, &format!("{prefix}.supra{k}"), in_dim, &cfg, rng)?);
        }
        Ok(Self { cfg, layers })
    }

    pub fn config(&self) -> &MgnnConfig {
        &self.cfg
    }

    pub fn layers(&self) -> &[SupraLayer] {
        &self.layers
    }

    pub fn out_dim(&self) -> usize {
        self.cfg.out_dim()
    }

    /// Replica embeddings. Dropout is active only when `rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SupraGraph,
        x: Var,
        mut rng: Option<&mut dyn RngCore>,
    ) -> Result<Var> {
        let mut h = x;
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                h = tape.elu(h);
            }
            if let Some(r) = rng.as_deref_mut() {
                h = tape.dropout(h, self.cfg.dropout, r)?;
            }
            h = layer.forward(tape, store, graph, h)?;
        }
        Ok(h)
    }
}
