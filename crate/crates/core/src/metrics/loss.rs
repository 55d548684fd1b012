//! Forward values of the training losses, for checking trainer output.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const TRIPLET_MARGIN: f64 = 0.3;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Batch-hard triplet loss: mean over anchors of
/// `max(0, margin + d(hardest positive) - d(hardest negative))`.
pub fn batch_hard_triplet_loss(features: &[Vec<f64>], labels: &[u64], margin: f64) -> Result<f64> {
    if features.len() != labels.len() {
        return Err(Error::invalid("one label per feature row required"));
    }
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid("feature rows differ in length"));
    }
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::invalid("triplet loss needs at least two labels"));
    }
    if let Some((label, _)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::invalid(format!("label {label} has a single sample")));
    }
    let mut total = 0.0;
    for (a, fa) in features.iter().enumerate() {
        let mut hardest_pos = 0.0f64;
        let mut hardest_neg = f64::INFINITY;
        for (b, fb) in features.iter().enumerate() {
            if a == b {
                continue;
            }
            let d = euclidean(fa, fb);
            if labels[a] == labels[b] {
                hardest_pos = hardest_pos.max(d);
            } else {
                hardest_neg = hardest_neg.min(d);
            }
        }
        total += (margin + hardest_pos - hardest_neg).max(0.0);
    }
    Ok(total / features.len() as f64)
}

/// Cross-entropy against the smoothed target: `1 - epsilon` on the true
/// class and `epsilon / (C - 1)` on every other class.
pub fn label_smoothed_ce(logits: &[Vec<f64>], labels: &[usize], epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1)")));
    }
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::invalid("need a non-empty batch with one label per row"));
    }
    let classes = logits[0].len();
    if classes < 2 || logits.iter().any(|l| l.len() != classes) {
        return Err(Error::invalid("all rows need the same number (>= 2) of classes"));
    }
    let off = epsilon / (classes - 1) as f64;
    let mut total = 0.0;
    for (row, &label) in logits.iter().zip(labels) {
        if label >= classes {
            return Err(Error::invalid(format!("label {label} outside {classes} classes")));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total -= row
            .iter()
            .enumerate()
            .map(|(c, z)| (if c == label { 1.0 - epsilon } else { off }) * (z - lse))
            .sum::<f64>();
    }
    Ok(total / logits.len() as f64)
}
