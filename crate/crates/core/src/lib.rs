//! Multilayer graph neural networks.
//!
//! The crate is split along the data flow of a multilayer learning task:
//!
//! - [`mlgraph`]: the multilayer network model (replicas, layers, inter-layer
//!   edges), the explode step that turns a network into `L + 1` graphs, and
//!   the supra-matrix spectral tools (supra-Laplacian, algebraic
//!   connectivity, superdiffusion criterion).
//! - [`tensor`]: a small reverse-mode autodiff tape over dense `f64` matrices.
//! - [`nn`]: graph attention, the supra-layer that runs independent intra- and
//!   inter-layer attention and fuses them, replica aggregation, attention
//!   pooling and MLP heads.
//! - [`train`]: AdamW, losses, splits, metrics and the early-stopping loop.
//! - [`exp`]: synthetic generators and the node classification, link
//!   prediction and superdiffusion pipelines.
//! - [`mlg`]: the `.mlg` text format, dataset manifests and JSON-lines records.

pub mod error;
pub mod exp;
pub mod mlg;
pub mod mlgraph;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use mlgraph::{LayerGraph, MultilayerNetwork, Replica, SupraMatrix};
pub use tensor::{ParamStore, Tape, Tensor, Var};
