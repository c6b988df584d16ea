//! Classification and feature-recovery metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann–Whitney statistic, ties given
/// average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("non-finite score".into()));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Data("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..labels.len()).filter(|&k| labels[k] == 1).map(|k| ranks[k]).sum();
    let (n1, n0) = (n1 as f64, n0 as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

/// F1 score of binary predictions; 0 when there is no true positive.
pub fn f1(pred: &[u8], labels: &[u8]) -> Result<f64> {
    if pred.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            labels.len()
        )));
    }
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fne += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fne) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Fraction of selected ids that are planted signal.
pub fn feature_precision(selected: &BTreeSet<String>, truth: &BTreeSet<String>) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::InvalidArgument("feature precision of an empty selection".into()));
    }
    Ok(selected.intersection(truth).count() as f64 / selected.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_errors() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(f1(&[0, 0, 0], &[1, 0, 1]).unwrap(), 0.0);
        // TP=8, FP=2, FN=4
        let mut pred = vec![1u8; 10];
        pred.extend([0; 4]);
        let mut labels = vec![1u8; 8];
        labels.extend([0, 0, 1, 1, 1, 1]);
        let expect = 2.0 * (0.8 * (2.0 / 3.0)) / (0.8 + 2.0 / 3.0);
        assert!((f1(&pred, &labels).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 8.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn feature_precision_cases() {
        let truth = set(&["a", "b", "c"]);
        assert_eq!(feature_precision(&set(&["a", "b"]), &truth).unwrap(), 1.0);
        assert_eq!(feature_precision(&set(&["x", "y"]), &truth).unwrap(), 0.0);
        assert!(feature_precision(&set(&[]), &truth).is_err());
        let truth: BTreeSet<String> = (0..8).map(|i| format!("t{i}")).collect();
        let mut sel = truth.clone();
        sel.extend(["x".to_string(), "y".to_string()]);
        assert_eq!(feature_precision(&sel, &truth).unwrap(), 0.8);
    }
}
