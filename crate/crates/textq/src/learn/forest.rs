//! Random forest of gini trees on bootstrap samples.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;
use crate::rng::stream;

use super::tree::{grow_tree, GrowParams, LeafKind, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
}

/// Trains `n_trees` gini trees on seeded bootstrap samples with sqrt
/// feature subsampling per split. Trees build in parallel; per-tree
/// derived seeds keep the model independent of worker count.
pub fn train_forest(features: &Features, labels: &[u8], config: &ForestConfig) -> Result<ForestModel> {
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
    if config.n_trees == 0 {
        return Err(Error::Invalid("forest needs at least one tree".into()));
    }
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let features_per_split = (features.n_cols() as f64).sqrt().floor().max(1.0) as usize;
    let params = GrowParams {
        max_depth: config.max_depth,
        min_leaf: 1,
        features_per_split: Some(features_per_split),
        leaf: LeafKind::Mean,
    };
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(config.seed, &format!("tree:{t}"));
            // bootstrap: n draws with replacement; an all-one-label sample
            // just grows a single-leaf tree with that class probability
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow_tree(features, &rows, &targets, None, &params, Some(&mut rng))
        })
        .collect();
    Ok(ForestModel {
        config: *config,
        trees,
    })
}

impl ForestModel {
    pub fn predict_proba(&self, features: &Features, row: usize) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(features, row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn scores(&self, features: &Features) -> Vec<f64> {
        (0..features.n_rows()).map(|i| self.predict_proba(features, i)).collect()
    }
}
