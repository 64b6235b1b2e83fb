//! ROC-AUC via the Mann-Whitney statistic.

use crate::error::{Error, Result};

/// Probability that a random positive scores above a random negative,
/// ties half-credited; computed exactly through midrank sums.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Invalid("non-finite score".into()));
    }
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based midrank of the tied block [i, j]
        let midrank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Brute-force AUC over every positive-negative pair; the independent
/// oracle for small inputs.
pub fn roc_auc_pairwise(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 0)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let mut total = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                total += 1.0;
            } else if p == q {
                total += 0.5;
            }
        }
    }
    Ok(total / (pos.len() * neg.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfectly_ordered_scores() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let labels = [0, 0, 1, 1];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_equal_scores_give_half() {
        let scores = [0.5; 6];
        let labels = [0, 1, 0, 1, 0, 1];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(roc_auc(&[0.1], &[1, 0]).is_err());
    }

    // Pairwise enumeration oracle on every small dataset shape with ties.
    #[test]
    fn matches_pairwise_enumeration() {
        use rand::Rng;
        let mut rng = crate::rng::stream(13, "auc-oracle");
        for n in 2..=20 {
            for _ in 0..40 {
                let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
                if labels.iter().all(|&l| l == 0) || labels.iter().all(|&l| l == 1) {
                    continue;
                }
                // coarse grid forces plenty of ties
                let scores: Vec<f64> =
                    (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
                let fast = roc_auc(&scores, &labels).unwrap();
                let brute = roc_auc_pairwise(&scores, &labels).unwrap();
                assert!(
                    (fast - brute).abs() < 1e-12,
                    "n={n} fast={fast} brute={brute}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance(
            raw in proptest::collection::vec((0u8..2, -10.0f64..10.0), 4..40),
        ) {
            let labels: Vec<u8> = raw.iter().map(|(l, _)| *l).collect();
            let scores: Vec<f64> = raw.iter().map(|(_, s)| *s).collect();
            prop_assume!(labels.iter().any(|&l| l == 0) && labels.iter().any(|&l| l == 1));
            let base = roc_auc(&scores, &labels).unwrap();
            // strictly increasing transform: 2x + 1 and exp(x/10)
            let t1: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
            let t2: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp()).collect();
            prop_assert!((roc_auc(&t1, &labels).unwrap() - base).abs() < 1e-12);
            prop_assert!((roc_auc(&t2, &labels).unwrap() - base).abs() < 1e-9);
        }

        #[test]
        fn negation_complements(
            raw in proptest::collection::vec((0u8..2, -5.0f64..5.0), 4..40),
        ) {
            let labels: Vec<u8> = raw.iter().map(|(l, _)| *l).collect();
            let scores: Vec<f64> = raw.iter().map(|(_, s)| *s).collect();
            prop_assume!(labels.iter().any(|&l| l == 0) && labels.iter().any(|&l| l == 1));
            let a = roc_auc(&scores, &labels).unwrap();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let b = roc_auc(&neg, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
