//! TF-IDF features with the three vocabulary filtering modes.
//!
//! Vocabulary is built from stopword-filtered feature tokens, then
//! filtered by mode: `top` keeps the `top_k` most frequent tokens (ties
//! broken lexicographically), `min` keeps tokens whose corpus frequency
//! exceeds `min_freq`, `raw` keeps everything. Weights follow
//! `tf * (ln((1 + n_docs) / (1 + df)) + 1)` with L2 row normalization.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::{feature_tokens, stopword_filter};

use super::matrix::{FeatureMatrix, Features, SparseMatrix};

pub const DEFAULT_TOP_K: usize = 5_000;
pub const DEFAULT_MIN_FREQ: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VocabMode {
    /// Keep the `top_k` most frequent tokens.
    Top,
    /// Keep tokens with corpus frequency strictly greater than `min_freq`.
    Min,
    /// No filtering.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub mode: VocabMode,
    pub top_k: usize,
    pub min_freq: usize,
}

impl TfidfConfig {
    pub fn new(mode: VocabMode) -> Self {
        TfidfConfig {
            mode,
            top_k: DEFAULT_TOP_K,
            min_freq: DEFAULT_MIN_FREQ,
        }
    }
}

/// A fitted vectorizer: vocabulary, document frequencies, and the mode it
/// was built under. Immutable after fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// Tokens in column order (lexicographic).
    pub vocabulary: Vec<String>,
    /// Documents containing each vocabulary token.
    pub doc_freq: Vec<u32>,
    pub n_docs: usize,
    pub config: TfidfConfig,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl TfidfModel {
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn idf(&self, col: u32) -> f64 {
        let df = f64::from(self.doc_freq[col as usize]);
        ((1.0 + self.n_docs as f64) / (1.0 + df)).ln() + 1.0
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }
}

/// Fits a TF-IDF model on a corpus.
///
/// Stopwords are removed before frequency counting. Corpus frequency
/// (total occurrences) drives the top/min filters; document frequency
/// drives the IDF term.
pub fn fit_tfidf(
    corpus: &Corpus,
    config: TfidfConfig,
    stoplist: &HashSet<String>,
) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::Invalid("cannot fit TF-IDF on an empty corpus".into()));
    }
    let mut corpus_freq: HashMap<String, u64> = HashMap::new();
    let mut doc_freq: HashMap<String, u32> = HashMap::new();
    for inst in &corpus.instances {
        let tokens = stopword_filter(feature_tokens(&inst.text), stoplist);
        let mut seen: HashSet<&str> = HashSet::new();
        for t in &tokens {
            *corpus_freq.entry(t.clone()).or_insert(0) += 1;
        }
        for t in &tokens {
            if seen.insert(t.as_str()) {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
    }

    let mut vocabulary: Vec<String> = match config.mode {
        VocabMode::Raw => corpus_freq.keys().cloned().collect(),
        VocabMode::Min => corpus_freq
            .iter()
            .filter(|(_, &c)| c > config.min_freq as u64)
            .map(|(t, _)| t.clone())
            .collect(),
        VocabMode::Top => {
            let mut by_freq: Vec<(&String, u64)> =
                corpus_freq.iter().map(|(t, &c)| (t, c)).collect();
            // frequency descending, ties lexicographic ascending
            by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            by_freq
                .into_iter()
                .take(config.top_k)
                .map(|(t, _)| t.clone())
                .collect()
        }
    };
    if vocabulary.is_empty() {
        return Err(Error::Invalid(format!(
            "empty vocabulary after {:?} filtering",
            config.mode
        )));
    }
    vocabulary.sort_unstable();
    let doc_freq: Vec<u32> = vocabulary.iter().map(|t| doc_freq[t]).collect();
    let mut model = TfidfModel {
        vocabulary,
        doc_freq,
        n_docs: corpus.len(),
        config,
        index: HashMap::new(),
    };
    model.rebuild_index();
    Ok(model)
}

/// Transforms one document into a sorted, L2-normalized sparse row.
/// Out-of-vocabulary tokens are ignored; an all-OOV document yields the
/// zero row.
pub fn transform_tfidf(
    model: &TfidfModel,
    text: &str,
    stoplist: &HashSet<String>,
) -> Vec<(u32, f64)> {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for token in stopword_filter(feature_tokens(text), stoplist) {
        if let Some(col) = model.column(&token) {
            *counts.entry(col).or_insert(0.0) += 1.0;
        }
    }
    let mut row: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(col, tf)| (col, tf * model.idf(col)))
        .collect();
    row.sort_by_key(|(c, _)| *c);
    let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut row {
            *v /= norm;
        }
    }
    row
}

/// Fit-and-transform over a corpus into an aligned feature matrix.
pub fn tfidf_matrix(
    corpus: &Corpus,
    model: &TfidfModel,
    stoplist: &HashSet<String>,
) -> Result<FeatureMatrix> {
    let mut sparse = SparseMatrix::new(model.vocab_size());
    for inst in &corpus.instances {
        sparse.push_row(&transform_tfidf(model, &inst.text, stoplist));
    }
    let matrix = FeatureMatrix {
        features: Features::Sparse(sparse),
        labels: corpus.instances.iter().map(|i| i.label).collect(),
        groups: corpus.instances.iter().map(|i| i.subject_id.clone()).collect(),
        instance_ids: corpus.instances.iter().map(|i| i.instance_id.clone()).collect(),
        feature_id: format!("tfidf-{:?}", model.config.mode).to_lowercase(),
        vocab: Some(model.vocabulary.clone()),
    };
    matrix.validate()?;
    Ok(matrix)
}
