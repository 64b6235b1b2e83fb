//! The degradation sweep: corrupt at each rate, featurize under each
//! representation, train each model, report ROC-AUC per cell.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::corrupt::{corrupt_corpus, CorruptionConfig, ALL_OPS};
use crate::error::{Error, Result};
use crate::features::{
    embedding_matrix, fit_tfidf, load_embeddings, load_precomputed_vectors, tfidf_matrix,
    EmbeddingTable, FeatureMatrix, TfidfConfig, VocabMode,
};
use crate::learn::{
    group_split, roc_auc, train_forest, train_gbt, train_logreg, ForestConfig, GbtConfig,
    LogRegConfig, TrainedModel,
};
use crate::rng::derive_seed;

use super::report::{CompareReport, CompareRow, SweepCell, SweepEcho, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    TfidfTop,
    TfidfMin,
    TfidfRaw,
    EmbedAvg,
    Precomputed,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 5] = [
        FeatureMode::TfidfTop,
        FeatureMode::TfidfMin,
        FeatureMode::TfidfRaw,
        FeatureMode::EmbedAvg,
        FeatureMode::Precomputed,
    ];

    pub fn is_tfidf(self) -> bool {
        matches!(self, FeatureMode::TfidfTop | FeatureMode::TfidfMin | FeatureMode::TfidfRaw)
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            FeatureMode::TfidfTop => "tfidf-top",
            FeatureMode::TfidfMin => "tfidf-min",
            FeatureMode::TfidfRaw => "tfidf-raw",
            FeatureMode::EmbedAvg => "embed-avg",
            FeatureMode::Precomputed => "precomputed",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf-top" => Ok(FeatureMode::TfidfTop),
            "tfidf-min" => Ok(FeatureMode::TfidfMin),
            "tfidf-raw" => Ok(FeatureMode::TfidfRaw),
            "embed-avg" => Ok(FeatureMode::EmbedAvg),
            "precomputed" => Ok(FeatureMode::Precomputed),
            other => Err(Error::Invalid(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logreg,
    Forest,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logreg, ModelKind::Forest, ModelKind::Gbt];
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Forest => "forest",
            ModelKind::Gbt => "gbt",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ModelKind::Logreg),
            "forest" => Ok(ModelKind::Forest),
            "gbt" => Ok(ModelKind::Gbt),
            other => Err(Error::Invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

pub const DEFAULT_RATES: [f64; 5] = [0.0, 0.05, 0.10, 0.15, 0.20];

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Corruption rates, ascending, each in [0, 0.5].
    pub rates: Vec<f64>,
    pub feature_modes: Vec<FeatureMode>,
    pub model_kinds: Vec<ModelKind>,
    pub seed: u64,
    pub test_frac: f64,
    /// Corruption realizations per rate.
    pub replicates: usize,
    pub top_k: usize,
    pub min_freq: usize,
    pub punct_weight: f64,
    pub stoplist: HashSet<String>,
    pub embeddings_path: Option<PathBuf>,
    pub precomputed_path: Option<PathBuf>,
    pub logreg: LogRegConfig,
    pub forest: ForestConfig,
    pub gbt: GbtConfig,
}

impl SweepConfig {
    pub fn new(seed: u64) -> Self {
        SweepConfig {
            rates: DEFAULT_RATES.to_vec(),
            feature_modes: vec![FeatureMode::TfidfTop],
            model_kinds: vec![ModelKind::Logreg],
            seed,
            test_frac: 0.2,
            replicates: 1,
            top_k: crate::features::DEFAULT_TOP_K,
            min_freq: crate::features::DEFAULT_MIN_FREQ,
            punct_weight: crate::corrupt::DEFAULT_PUNCT_WEIGHT,
            stoplist: crate::tokenize::default_stoplist(),
            embeddings_path: None,
            precomputed_path: None,
            logreg: LogRegConfig::default(),
            forest: ForestConfig::default(),
            gbt: GbtConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() {
            return Err(Error::Invalid("no rates to sweep".into()));
        }
        if self.rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("rates must be strictly ascending".into()));
        }
        if self.rates.iter().any(|r| !(0.0..=0.5).contains(r)) {
            return Err(Error::Invalid("rates must lie in [0, 0.5]".into()));
        }
        if self.feature_modes.is_empty() || self.model_kinds.is_empty() {
            return Err(Error::Invalid("feature modes and model kinds must be non-empty".into()));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return Err(Error::Invalid(format!("test_frac {} outside (0, 1)", self.test_frac)));
        }
        if self.replicates == 0 {
            return Err(Error::Invalid("replicates must be at least 1".into()));
        }
        if self.feature_modes.contains(&FeatureMode::EmbedAvg) && self.embeddings_path.is_none() {
            return Err(Error::Invalid("embed-avg requires an embeddings file".into()));
        }
        if self.feature_modes.contains(&FeatureMode::Precomputed)
            && self.precomputed_path.is_none()
        {
            return Err(Error::Invalid("precomputed requires a vector file".into()));
        }
        Ok(())
    }

    pub(crate) fn echo(&self) -> SweepEcho {
        SweepEcho {
            rates: self.rates.clone(),
            feature_modes: self.feature_modes.iter().map(|m| m.to_string()).collect(),
            model_kinds: self.model_kinds.iter().map(|m| m.to_string()).collect(),
            seed: self.seed,
            test_frac: self.test_frac,
            replicates: self.replicates,
            top_k: self.top_k,
            min_freq: self.min_freq,
            punct_weight: self.punct_weight,
        }
    }
}

fn rate_tag(rate: f64) -> u32 {
    (rate * 10_000.0).round() as u32
}

/// Featurizes one corpus under one mode.
fn featurize(
    corpus: &Corpus,
    mode: FeatureMode,
    config: &SweepConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<FeatureMatrix> {
    match mode {
        FeatureMode::TfidfTop | FeatureMode::TfidfMin | FeatureMode::TfidfRaw => {
            let vocab_mode = match mode {
                FeatureMode::TfidfTop => VocabMode::Top,
                FeatureMode::TfidfMin => VocabMode::Min,
                _ => VocabMode::Raw,
            };
            let tf_config = TfidfConfig {
                mode: vocab_mode,
                top_k: config.top_k,
                min_freq: config.min_freq,
            };
            let model = fit_tfidf(corpus, tf_config, &config.stoplist)?;
            tfidf_matrix(corpus, &model, &config.stoplist)
        }
        FeatureMode::EmbedAvg => {
            let table = embeddings
                .ok_or_else(|| Error::Invalid("embeddings not loaded".into()))?;
            Ok(embedding_matrix(corpus, table)?.0)
        }
        FeatureMode::Precomputed => {
            let path = config
                .precomputed_path
                .as_ref()
                .ok_or_else(|| Error::Invalid("precomputed requires a vector file".into()))?;
            load_precomputed_vectors(path, corpus)
        }
    }
}

/// Trains one model kind and evaluates ROC-AUC on the held-out rows.
fn train_eval(
    matrix: &FeatureMatrix,
    kind: ModelKind,
    config: &SweepConfig,
    cell_seed: u64,
) -> Result<(f64, usize, usize)> {
    let split = group_split(matrix, config.test_frac, derive_seed(config.seed, "split"))?;
    let train = matrix.subset(&split.train);
    let test = matrix.subset(&split.test);
    let model = match kind {
        ModelKind::Logreg => {
            TrainedModel::Logreg(train_logreg(&train.features, &train.labels, &config.logreg)?)
        }
        ModelKind::Forest => {
            let forest_config = ForestConfig {
                seed: cell_seed,
                ..config.forest
            };
            TrainedModel::Forest(train_forest(&train.features, &train.labels, &forest_config)?)
        }
        ModelKind::Gbt => {
            TrainedModel::Gbt(train_gbt(&train.features, &train.labels, &config.gbt)?)
        }
    };
    let scores = model.scores(&test.features);
    let auc = roc_auc(&scores, &test.labels)?;
    Ok((auc, split.train.len(), split.test.len()))
}

/// Runs the full (rate x replicate x mode x model) grid.
///
/// Rate 0 is the uncorrupted input itself. Each positive rate corrupts
/// the corpus once per replicate with a seed derived from
/// `(seed, rate, replicate)`; the group split reuses one derived seed
/// everywhere so cells differ only in text quality. Cell failures are
/// recorded in the report and the sweep continues.
pub fn run_sweep(corpus: &Corpus, config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot sweep an empty corpus".into()));
    }
    let embeddings = match &config.embeddings_path {
        Some(path) if config.feature_modes.contains(&FeatureMode::EmbedAvg) => {
            Some(load_embeddings(path)?)
        }
        _ => None,
    };

    let blocks: Vec<(f64, usize)> = config
        .rates
        .iter()
        .flat_map(|&rate| (0..config.replicates).map(move |rep| (rate, rep)))
        .collect();

    let cell_blocks: Vec<Result<Vec<SweepCell>>> = blocks
        .par_iter()
        .map(|&(rate, replicate)| -> Result<Vec<SweepCell>> {
            let corrupted;
            let working = if rate == 0.0 {
                corpus
            } else {
                let corruption = CorruptionConfig {
                    target_rate: rate,
                    seed: derive_seed(config.seed, &format!("corrupt:{}:{replicate}", rate_tag(rate))),
                    punct_weight: config.punct_weight,
                    ops: ALL_OPS.to_vec(),
                };
                corrupted = corrupt_corpus(corpus, &corruption)?.0;
                &corrupted
            };
            let mut cells = Vec::new();
            for &mode in &config.feature_modes {
                let started = Instant::now();
                let matrix = featurize(working, mode, config, embeddings.as_ref());
                match matrix {
                    Err(e) => {
                        for &kind in &config.model_kinds {
                            cells.push(SweepCell {
                                rate,
                                replicate,
                                feature_mode: mode.to_string(),
                                model_kind: kind.to_string(),
                                roc_auc: None,
                                vocab_size: None,
                                n_train: 0,
                                n_test: 0,
                                wall_time_secs: started.elapsed().as_secs_f64(),
                                error: Some(e.to_string()),
                            });
                        }
                    }
                    Ok(matrix) => {
                        let vocab_size = matrix.vocab.as_ref().map(Vec::len);
                        for &kind in &config.model_kinds {
                            let cell_seed = derive_seed(
                                config.seed,
                                &format!("cell:{}:{replicate}:{mode}:{kind}", rate_tag(rate)),
                            );
                            let cell_start = Instant::now();
                            let outcome = train_eval(&matrix, kind, config, cell_seed);
                            let wall = started.elapsed().as_secs_f64()
                                + cell_start.elapsed().as_secs_f64();
                            match outcome {
                                Ok((auc, n_train, n_test)) => cells.push(SweepCell {
                                    rate,
                                    replicate,
                                    feature_mode: mode.to_string(),
                                    model_kind: kind.to_string(),
                                    roc_auc: Some(auc),
                                    vocab_size,
                                    n_train,
                                    n_test,
                                    wall_time_secs: wall,
                                    error: None,
                                }),
                                Err(e) => cells.push(SweepCell {
                                    rate,
                                    replicate,
                                    feature_mode: mode.to_string(),
                                    model_kind: kind.to_string(),
                                    roc_auc: None,
                                    vocab_size,
                                    n_train: 0,
                                    n_test: 0,
                                    wall_time_secs: wall,
                                    error: Some(e.to_string()),
                                }),
                            }
                        }
                    }
                }
            }
            Ok(cells)
        })
        .collect();

    let mut cells = Vec::new();
    for block in cell_blocks {
        cells.extend(block?);
    }
    Ok(SweepReport {
        cells,
        config: config.echo(),
        corpus_name: corpus.metadata.name.clone(),
        corpus_provenance: corpus.metadata.provenance.clone(),
        n_instances: corpus.len(),
    })
}

/// Pairs an original corpus with its corrected version and reports the
/// per (mode, model) AUC delta at rate 0.
pub fn compare_corrected(
    original: &Corpus,
    corrected: &Corpus,
    config: &SweepConfig,
) -> Result<CompareReport> {
    config.validate()?;
    if original.len() != corrected.len() {
        return Err(Error::Invalid(format!(
            "corpora differ in size: {} vs {}",
            original.len(),
            corrected.len()
        )));
    }
    // align the corrected corpus to the original's instance order
    let by_id: HashMap<&str, usize> = corrected
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.instance_id.as_str(), i))
        .collect();
    let mut aligned = Vec::with_capacity(original.len());
    for inst in &original.instances {
        let &at = by_id
            .get(inst.instance_id.as_str())
            .ok_or_else(|| Error::Invalid(format!("corrected corpus is missing {}", inst.instance_id)))?;
        aligned.push(corrected.instances[at].clone());
    }
    let corrected = Corpus {
        instances: aligned,
        metadata: corrected.metadata.clone(),
    };

    let embeddings = match &config.embeddings_path {
        Some(path) if config.feature_modes.contains(&FeatureMode::EmbedAvg) => {
            Some(load_embeddings(path)?)
        }
        _ => None,
    };
    let mut rows = Vec::new();
    for &mode in &config.feature_modes {
        let m_orig = featurize(original, mode, config, embeddings.as_ref())?;
        let m_corr = featurize(&corrected, mode, config, embeddings.as_ref())?;
        for &kind in &config.model_kinds {
            let cell_seed = derive_seed(config.seed, &format!("compare:{mode}:{kind}"));
            let (auc_original, ..) = train_eval(&m_orig, kind, config, cell_seed)?;
            let (auc_corrected, ..) = train_eval(&m_corr, kind, config, cell_seed)?;
            rows.push(CompareRow {
                feature_mode: mode.to_string(),
                model_kind: kind.to_string(),
                auc_original,
                auc_corrected,
                delta: auc_corrected - auc_original,
            });
        }
    }
    Ok(CompareReport {
        rows,
        config: config.echo(),
        n_instances: original.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::make_synthetic_corpus;

    fn quick_config(seed: u64) -> SweepConfig {
        let mut config = SweepConfig::new(seed);
        config.rates = vec![0.0, 0.2];
        config.logreg.max_epochs = 120;
        config
    }

    #[test]
    fn mode_and_kind_round_trip_strings() {
        for mode in FeatureMode::ALL {
            assert_eq!(mode.to_string().parse::<FeatureMode>().unwrap(), mode);
        }
        for kind in ModelKind::ALL {
            assert_eq!(kind.to_string().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("tfidf".parse::<FeatureMode>().is_err());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let corpus = make_synthetic_corpus(20, 20, 1.0, 1).unwrap();
        let mut config = quick_config(1);
        config.rates = vec![0.2, 0.1];
        assert!(run_sweep(&corpus, &config).is_err());
        let mut config = quick_config(1);
        config.feature_modes = vec![FeatureMode::EmbedAvg];
        assert!(run_sweep(&corpus, &config).is_err());
        let mut config = quick_config(1);
        config.model_kinds.clear();
        assert!(run_sweep(&corpus, &config).is_err());
    }

    #[test]
    fn degenerate_sweep_equals_direct_run() {
        let corpus = make_synthetic_corpus(60, 40, 1.0, 3).unwrap();
        let mut config = quick_config(9);
        config.rates = vec![0.0];
        let report = run_sweep(&corpus, &config).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert!(cell.error.is_none());

        // standalone train/eval with the same derived seeds
        let matrix = featurize(&corpus, FeatureMode::TfidfTop, &config, None).unwrap();
        let cell_seed = derive_seed(config.seed, "cell:0:0:tfidf-top:logreg");
        let (auc, n_train, n_test) =
            train_eval(&matrix, ModelKind::Logreg, &config, cell_seed).unwrap();
        assert_eq!(cell.roc_auc, Some(auc));
        assert_eq!((cell.n_train, cell.n_test), (n_train, n_test));
    }

    #[test]
    fn sweep_is_deterministic_modulo_wall_time() {
        let corpus = make_synthetic_corpus(40, 30, 1.0, 5).unwrap();
        let config = quick_config(11);
        let mut a = run_sweep(&corpus, &config).unwrap();
        let mut b = run_sweep(&corpus, &config).unwrap();
        a.strip_wall_times();
        b.strip_wall_times();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn compare_identical_corpora_has_zero_deltas() {
        let corpus = make_synthetic_corpus(40, 30, 1.0, 7).unwrap();
        let config = quick_config(13);
        let report = compare_corrected(&corpus, &corpus, &config).unwrap();
        assert!(!report.rows.is_empty());
        for row in &report.rows {
            assert_eq!(row.delta, 0.0);
        }
    }

    #[test]
    fn compare_rejects_misaligned_ids() {
        let a = make_synthetic_corpus(20, 20, 1.0, 1).unwrap();
        let mut b = a.clone();
        b.instances[0].instance_id = "other".into();
        assert!(compare_corrected(&a, &b, &quick_config(1)).is_err());
    }

    #[test]
    fn compare_handles_shuffled_order() {
        let a = make_synthetic_corpus(20, 20, 1.0, 1).unwrap();
        let mut b = a.clone();
        b.instances.reverse();
        let config = quick_config(2);
        let report = compare_corrected(&a, &b, &config).unwrap();
        for row in &report.rows {
            assert_eq!(row.delta, 0.0);
        }
    }
}
