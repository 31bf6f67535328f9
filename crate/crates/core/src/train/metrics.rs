use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decision threshold for binary predictions; scores at or above it count
/// as positive.
pub const THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub auc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney via average ranks).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_len(scores.len(), labels.len())?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes present".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn binary_metrics(scores: &[f64], labels: &[bool]) -> Result<BinaryMetrics> {
    let auc = auc(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= THRESHOLD, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let (precision, recall, f1) = prf(tp, fp, fn_);
    Ok(BinaryMetrics { accuracy: (tp + tn) as f64 / labels.len() as f64, auc, precision, recall, f1 })
}

/// Precision, recall and F1, each zero when undefined.
fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn argmax_rows(logits: &[f64], n_classes: usize) -> Vec<usize> {
    logits
        .chunks_exact(n_classes)
        .map(|row| (0..n_classes).fold(0, |best, k| if row[k] > row[best] { k } else { best }))
        .collect()
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> Result<f64> {
    check_len(pred.len(), labels.len())?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    Ok(pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64)
}

/// Unweighted mean of per-class F1 over classes that occur in either the
/// predictions or the labels.
pub fn macro_f1(pred: &[usize], labels: &[usize], n_classes: usize) -> Result<f64> {
    check_len(pred.len(), labels.len())?;
    let mut total = 0.0;
    let mut seen = 0;
    for k in 0..n_classes {
        let tp = pred.iter().zip(labels).filter(|&(&p, &l)| p == k && l == k).count();
        let fp = pred.iter().zip(labels).filter(|&(&p, &l)| p == k && l != k).count();
        let fn_ = pred.iter().zip(labels).filter(|&(&p, &l)| p != k && l == k).count();
        if tp + fp + fn_ > 0 {
            total += prf(tp, fp, fn_).2;
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(Error::InvalidArgument("macro-F1 of an empty set".into()));
    }
    Ok(total / seen as f64)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!("{a} predictions for {b} labels")));
    }
    Ok(())
}
