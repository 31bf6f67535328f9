//! Optimizer, splits, metrics and the early-stopping loop.

mod fit;
mod metrics;
mod optim;
mod split;

pub use fit::{train_loop, EpochRecord, Objective, StopConfig, TrainOutcome};
pub use metrics::{accuracy, argmax_rows, auc, binary_metrics, macro_f1, BinaryMetrics, THRESHOLD};
pub use optim::{AdamW, AdamWConfig};
pub use split::{random_split, stratified_counts, stratified_split};

/// Inverse-frequency class weights `n / (C · n_k)`; absent classes get 0.
pub fn inverse_frequency_weights(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (n_classes as f64 * c as f64) })
        .collect()
}
