//! Gradient-boosted trees on the logistic loss.
//!
//! Each round fits a regression tree to the current gradients
//! `y - sigmoid(margin)` with Newton-step leaves, then adds the
//! shrinkage-scaled tree output to every margin. No row or feature
//! subsampling, so training is deterministic with no randomness at all.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;

use super::tree::{grow_tree, GrowParams, LeafKind, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_rounds: 100,
            shrinkage: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub config: GbtConfig,
    /// Log-odds of the training base rate.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn train_gbt(features: &Features, labels: &[u8], config: &GbtConfig) -> Result<GbtModel> {
    let n = features.n_rows();
    if n != labels.len() {
        return Err(Error::Invalid(format!("{n} rows for {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least two training rows".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Invalid("both labels are required for training".into()));
    }
    if !(config.shrinkage > 0.0 && config.shrinkage <= 1.0) {
        return Err(Error::Invalid(format!(
            "shrinkage {} outside (0, 1]",
            config.shrinkage
        )));
    }
    let base_rate = (labels.iter().map(|&l| f64::from(l)).sum::<f64>() / n as f64)
        .clamp(1e-6, 1.0 - 1e-6);
    let base_score = (base_rate / (1.0 - base_rate)).ln();

    let rows: Vec<usize> = (0..n).collect();
    let params = GrowParams {
        max_depth: config.max_depth,
        min_leaf: 1,
        features_per_split: None,
        leaf: LeafKind::NewtonStep,
    };
    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_rounds);
    let mut gradients = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    for _ in 0..config.n_rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            gradients[i] = f64::from(labels[i]) - p;
            hessians[i] = (p * (1.0 - p)).max(1e-12);
        }
        let tree = grow_tree(features, &rows, &gradients, Some(&hessians), &params, None);
        for (i, margin) in margins.iter_mut().enumerate() {
            *margin += config.shrinkage * tree.predict_row(features, i);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        config: *config,
        base_score,
        trees,
    })
}

impl GbtModel {
    pub fn predict_proba(&self, features: &Features, row: usize) -> f64 {
        let margin: f64 = self.base_score
            + self.config.shrinkage
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_row(features, row))
                    .sum::<f64>();
        sigmoid(margin)
    }

    pub fn scores(&self, features: &Features) -> Vec<f64> {
        (0..features.n_rows()).map(|i| self.predict_proba(features, i)).collect()
    }
}
