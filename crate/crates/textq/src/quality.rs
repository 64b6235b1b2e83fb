//! Token-level error rate and detector scoring.
//!
//! The error rate of an instance is the fraction of its whitespace tokens
//! that contain an error. Detector output is scored against ground-truth
//! annotations per note: absolute rate error, mismatched-token count
//! (symmetric difference), and exact-match / one-mismatch fractions.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tokenize::ws_token_count;

/// Which whitespace tokens of one instance are erroneous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub instance_id: String,
    pub erroneous_indices: BTreeSet<usize>,
    pub total_tokens: usize,
}

impl ErrorAnnotation {
    pub fn new(
        instance_id: impl Into<String>,
        erroneous_indices: BTreeSet<usize>,
        total_tokens: usize,
    ) -> Result<Self> {
        let annotation = ErrorAnnotation {
            instance_id: instance_id.into(),
            erroneous_indices,
            total_tokens,
        };
        annotation.validate()?;
        Ok(annotation)
    }

    fn validate(&self) -> Result<()> {
        if self.total_tokens == 0 {
            return Err(Error::Invalid(format!(
                "annotation {} covers zero tokens; exclude empty notes first",
                self.instance_id
            )));
        }
        if let Some(&bad) = self.erroneous_indices.iter().find(|&&i| i >= self.total_tokens) {
            return Err(Error::Invalid(format!(
                "annotation {}: index {bad} out of range for {} tokens",
                self.instance_id, self.total_tokens
            )));
        }
        Ok(())
    }

    /// Erroneous tokens over total tokens.
    pub fn error_rate(&self) -> f64 {
        self.erroneous_indices.len() as f64 / self.total_tokens as f64
    }
}

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

fn rate_stats(values: &[f64]) -> RateStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    RateStats {
        mean,
        std: var.sqrt(),
        n,
    }
}

/// Unweighted mean and population std of the per-instance error rates.
pub fn corpus_error_rate(annotations: &[ErrorAnnotation]) -> Result<RateStats> {
    if annotations.is_empty() {
        return Err(Error::Invalid("no annotations to aggregate".into()));
    }
    let rates: Vec<f64> = annotations.iter().map(ErrorAnnotation::error_rate).collect();
    Ok(rate_stats(&rates))
}

/// Per-note agreement between a truth annotation and a detector's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteScore {
    pub instance_id: String,
    pub truth_rate: f64,
    pub detected_rate: f64,
    pub abs_rate_error: f64,
    /// Size of the symmetric difference of the two index sets.
    pub mismatched_tokens: usize,
    pub exact_match: bool,
}

/// Scores one detected annotation against truth for the same instance.
pub fn score_detection(truth: &ErrorAnnotation, detected: &ErrorAnnotation) -> Result<NoteScore> {
    if truth.instance_id != detected.instance_id {
        return Err(Error::Invalid(format!(
            "cannot score {} against {}",
            detected.instance_id, truth.instance_id
        )));
    }
    if truth.total_tokens != detected.total_tokens {
        return Err(Error::TokenizationDrift {
            instance_id: truth.instance_id.clone(),
            truth: truth.total_tokens,
            detected: detected.total_tokens,
        });
    }
    let mismatched = truth
        .erroneous_indices
        .symmetric_difference(&detected.erroneous_indices)
        .count();
    let truth_rate = truth.error_rate();
    let detected_rate = detected.error_rate();
    Ok(NoteScore {
        instance_id: truth.instance_id.clone(),
        truth_rate,
        detected_rate,
        abs_rate_error: (truth_rate - detected_rate).abs(),
        mismatched_tokens: mismatched,
        exact_match: mismatched == 0,
    })
}

/// Corpus-level detector evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub per_note: Vec<NoteScore>,
    pub exact_match_fraction: f64,
    pub one_mismatch_fraction: f64,
    pub abs_rate_error: RateStats,
    pub mismatched_tokens: RateStats,
}

/// Aggregates per-note scores over (truth, detected) pairs.
pub fn detection_report(
    pairs: &[(ErrorAnnotation, ErrorAnnotation)],
) -> Result<DetectionReport> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no annotation pairs to score".into()));
    }
    let per_note: Vec<NoteScore> = pairs
        .iter()
        .map(|(t, d)| score_detection(t, d))
        .collect::<Result<_>>()?;
    let n = per_note.len() as f64;
    let exact = per_note.iter().filter(|s| s.exact_match).count() as f64;
    let one_off = per_note.iter().filter(|s| s.mismatched_tokens == 1).count() as f64;
    let abs_errors: Vec<f64> = per_note.iter().map(|s| s.abs_rate_error).collect();
    let mismatches: Vec<f64> = per_note.iter().map(|s| s.mismatched_tokens as f64).collect();
    Ok(DetectionReport {
        exact_match_fraction: exact / n,
        one_mismatch_fraction: one_off / n,
        abs_rate_error: rate_stats(&abs_errors),
        mismatched_tokens: rate_stats(&mismatches),
        per_note,
    })
}

impl DetectionReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(format!("serialize: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "instance_id,truth_rate,detected_rate,abs_rate_error,mismatched_tokens,exact_match\n",
        );
        for s in &self.per_note {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.instance_id,
                s.truth_rate,
                s.detected_rate,
                s.abs_rate_error,
                s.mismatched_tokens,
                s.exact_match
            ));
        }
        out
    }
}

/// Drops instances with fewer than `min_tokens` whitespace tokens.
pub fn min_token_filter(corpus: &Corpus, min_tokens: usize) -> Corpus {
    Corpus {
        instances: corpus
            .instances
            .iter()
            .filter(|i| ws_token_count(&i.text) >= min_tokens)
            .cloned()
            .collect(),
        metadata: corpus.metadata.clone(),
    }
}

/// Reads annotations from JSONL, one object per line.
pub fn load_annotations(path: &Path) -> Result<Vec<ErrorAnnotation>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ann: ErrorAnnotation =
            serde_json::from_str(&line).map_err(|e| Error::line(path, i + 1, e.to_string()))?;
        ann.validate()
            .map_err(|e| Error::line(path, i + 1, e.to_string()))?;
        out.push(ann);
    }
    Ok(out)
}

pub fn save_annotations(annotations: &[ErrorAnnotation], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ann in annotations {
        let json =
            serde_json::to_string(ann).map_err(|e| Error::Invalid(format!("serialize: {e}")))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
