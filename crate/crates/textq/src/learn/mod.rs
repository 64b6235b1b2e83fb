//! Classifiers and evaluation: logistic regression, random forests,
//! gradient-boosted trees, ROC-AUC, and group-aware splitting.

pub mod forest;
pub mod gbt;
pub mod logreg;
pub mod metrics;
pub mod split;
pub mod tree;

pub use forest::{train_forest, ForestConfig, ForestModel};
pub use gbt::{train_gbt, GbtConfig, GbtModel};
pub use logreg::{logreg_gradient, logreg_loss, train_logreg, LogRegConfig, LogRegModel};
pub use metrics::{roc_auc, roc_auc_pairwise};
pub use split::{group_split, GroupSplit};
pub use tree::{grow_tree, GrowParams, LeafKind, Tree, TreeNode};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Any trained classifier, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Logreg(LogRegModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl TrainedModel {
    pub fn scores(&self, features: &Features) -> Vec<f64> {
        match self {
            TrainedModel::Logreg(m) => m.scores(features),
            TrainedModel::Forest(m) => m.scores(features),
            TrainedModel::Gbt(m) => m.scores(features),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Logreg(_) => "logreg",
            TrainedModel::Forest(_) => "forest",
            TrainedModel::Gbt(_) => "gbt",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// Writes a model as versioned JSON.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| Error::Invalid(format!("serialize model: {e}")))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&contents)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Invalid(format!(
            "model format {} unsupported (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file.model)
}

/// One evaluation row, appended to results CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub roc_auc: f64,
    pub n_test: usize,
    pub model_id: String,
    pub feature_id: String,
    pub error_rate: f64,
}

pub const EVAL_CSV_HEADER: &str = "roc_auc,n_test,model_id,feature_id,error_rate";

/// Appends rows to a CSV, writing the header when the file is new.
pub fn append_eval_csv(results: &[EvalResult], path: &Path) -> Result<()> {
    use std::io::Write;
    let new = !path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    if new {
        writeln!(file, "{EVAL_CSV_HEADER}").map_err(|e| Error::io(path, e))?;
    }
    for r in results {
        writeln!(
            file,
            "{},{},{},{},{}",
            r.roc_auc, r.n_test, r.model_id, r.feature_id, r.error_rate
        )
        .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DenseMatrix;

    #[test]
    fn model_json_round_trip() {
        let mut m = DenseMatrix::new(1);
        m.push_row(&[-1.0]);
        m.push_row(&[1.0]);
        m.push_row(&[-0.5]);
        m.push_row(&[0.5]);
        let features = Features::Dense(m);
        let labels = [0, 1, 0, 1];
        let dir = tempfile::tempdir().unwrap();

        let models = [
            TrainedModel::Logreg(
                train_logreg(&features, &labels, &LogRegConfig::default()).unwrap(),
            ),
            TrainedModel::Forest(
                train_forest(
                    &features,
                    &labels,
                    &ForestConfig {
                        n_trees: 3,
                        max_depth: 2,
                        seed: 1,
                    },
                )
                .unwrap(),
            ),
            TrainedModel::Gbt(
                train_gbt(
                    &features,
                    &labels,
                    &GbtConfig {
                        n_rounds: 3,
                        ..Default::default()
                    },
                )
                .unwrap(),
            ),
        ];
        for model in &models {
            let path = dir.path().join(format!("{}.json", model.kind_name()));
            save_model(model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(model, &loaded);
            assert_eq!(model.scores(&features), loaded.scores(&features));
        }
    }

    #[test]
    fn eval_csv_appends_with_single_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let row = EvalResult {
            roc_auc: 0.9,
            n_test: 10,
            model_id: "logreg".into(),
            feature_id: "tfidf-top".into(),
            error_rate: 0.05,
        };
        append_eval_csv(&[row.clone()], &path).unwrap();
        append_eval_csv(&[row], &path).unwrap();
        let contents = std::fs::read_to_string(&path).unwrap();
        assert_eq!(contents.lines().count(), 3);
        assert!(contents.starts_with(EVAL_CSV_HEADER));
    }
}
