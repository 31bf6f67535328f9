use std::path::PathBuf;

use mgnn::exp::{gene_standin, run_node_classification, social_standin, ExperimentConfig, NodeData, Task};
use mgnn::mlg::{load_mlg, write_mlg, MlgDocument};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn shipped_files_match_their_generators() {
    let (net, labels) = gene_standin(0).unwrap();
    let mut doc = MlgDocument::new(net);
    doc.labels = labels.into_iter().enumerate().map(|(i, y)| (i, format!("class{y}"))).collect();
    assert_eq!(std::fs::read_to_string(data("genes.mlg")).unwrap(), write_mlg(&doc));

    let social = MlgDocument::new(social_standin(0).unwrap());
    assert_eq!(std::fs::read_to_string(data("social.mlg")).unwrap(), write_mlg(&social));
}

#[test]
fn gene_standin_trains_end_to_end() {
    let doc = load_mlg(&data("genes.mlg")).unwrap();
    let data = NodeData::from_document(&doc).unwrap();
    let cfg = ExperimentConfig {
        supra_layers: 1,
        head_dim: 4,
        heads: 2,
        head_hidden: vec![8],
        max_epochs: 3,
        patience: 3,
        ..ExperimentConfig::defaults(Task::NodeClf)
    };
    let report = run_node_classification(&data, &cfg).unwrap();
    assert_eq!(report.card.classes.len(), 6);
    assert_eq!(report.card.n_layers, 9);
    assert!(report.metric("test", "accuracy").is_some());
}
