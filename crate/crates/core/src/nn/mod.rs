//! Graph attention, the supra-layer, readouts and task models.

mod gat;
mod graph;
mod heads;
mod readout;
mod supra;

pub use gat::{Gat, GatConfig};
pub use graph::{input_features, input_width, EdgeIndex, FeatureMode, Standardizer, SupraGraph};
pub use heads::{GraphClassifier, LinkPredictor, NodeClassifier};
pub use readout::{replica_aggregate, zero_mlp, Linear, LinkScorer, Mlp, ReplicaMode, SoftAttentionPool};
pub use supra::{Aggregator, AggregatorKind, IntraGat, Mgnn, MgnnConfig, SupraLayer};
