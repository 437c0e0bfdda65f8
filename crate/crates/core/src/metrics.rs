//! Evaluation metrics.

use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::TursError;
use crate::model::RuleSet;

/// Binary ROC AUC of `scores` for the positives in `is_pos`, with midranks for ties.
fn binary_auc(scores: &[f64], is_pos: &[bool]) -> Option<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = alloc::vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = mid;
        }
        i = j + 1;
    }
    let pos = is_pos.iter().filter(|&&p| p).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let rank_sum: f64 = (0..n).filter(|&k| is_pos[k]).map(|k| ranks[k]).sum();
    let pos_f = pos as f64;
    Some((rank_sum - pos_f * (pos_f + 1.0) / 2.0) / (pos_f * neg as f64))
}

/// One-vs-rest ROC AUC averaged with weights proportional to class prevalence.
///
/// Classes absent from `labels` are skipped. For two classes this equals the
/// binary AUC of the positive-class probability. Fails when fewer than two
/// classes are present.
pub fn weighted_ovr_auc(probs: &[Vec<f64>], labels: &[u32]) -> Result<f64, TursError> {
    if probs.len() != labels.len() {
        return Err(TursError::InvalidArgument(format!(
            "{} probability rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let k = probs.first().map_or(0, |p| p.len());
    let n = labels.len();
    let mut total = 0.0;
    let mut weight = 0usize;
    let mut present = 0;
    for class in 0..k {
        let is_pos: Vec<bool> = labels.iter().map(|&y| y as usize == class).collect();
        let count = is_pos.iter().filter(|&&p| p).count();
        if count == 0 {
            continue;
        }
        present += 1;
        let scores: Vec<f64> = probs.iter().map(|p| p[class]).collect();
        if let Some(auc) = binary_auc(&scores, &is_pos) {
            total += auc * count as f64;
            weight += count;
        }
    }
    if present < 2 || weight == 0 || n == 0 {
        return Err(TursError::UndefinedAuc(format!(
            "AUC needs at least two classes, found {present}"
        )));
    }
    Ok(total / weight as f64)
}

/// Fraction of instances in `dataset` that satisfy at least two rules.
pub fn overlap_fraction(ruleset: &RuleSet, dataset: &Dataset) -> f64 {
    if dataset.n() == 0 {
        return 0.0;
    }
    let covers: Vec<_> = ruleset
        .conditions()
        .iter()
        .map(|c| dataset.cover_of(c))
        .collect();
    let overlapping = (0..dataset.n())
        .filter(|&i| covers.iter().filter(|c| c.contains(i)).count() >= 2)
        .count();
    overlapping as f64 / dataset.n() as f64
}
