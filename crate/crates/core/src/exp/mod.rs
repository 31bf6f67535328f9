//! Experiment pipelines and synthetic data.

mod config;
mod generators;
mod graphclf;
mod link;
mod linkpred;
mod node;
mod report;
mod standin;
mod superdiff;

pub use config::{ExperimentConfig, Task};
pub use generators::{clique_communities, mix_seed, ErMultiplexSpec, PlantedSpec};
pub use graphclf::{evaluate_graph_classification, predict_graphs, run_graph_classification, GraphSource, InstanceSource, ManifestSource};
pub use link::{leakage_report, make_link_split, LinkSplit, Pair};
pub use linkpred::{evaluate_link_prediction, run_link_prediction};
pub use node::{evaluate_node_classification, node_splits, run_node_classification, NodeData, NodeSplits};
pub use report::{find_metric, MetricRecord, ModelCard, RunReport};
pub use superdiff::{balance, build_superdiffusion_dataset, combinations, grid, Instance, SuperdiffConfig, SuperdiffusionDataset};
pub use standin::{gene_standin, social_standin, GENE_CLASS_SIZES, GENE_LAYERS, SOCIAL_LAYERS, SOCIAL_NODES};
