//! Error detection and correction through a chat-completion service.
//!
//! [`detect_errors`] asks which whitespace tokens of an instance contain
//! errors and maps the answer back onto token indices. [`correct_corpus`]
//! rewrites every instance (whole-note correction; sentence context beats
//! token-by-token prompts). The [`OracleClient`] answers both from a
//! corruption ledger so the entire path runs offline and its output can
//! be compared against ground truth exactly.

pub mod client;
pub mod oracle;
pub mod parse;
pub mod prompt;

pub use client::{ChatClient, ChatRequest, HttpChatClient, LlmConfig, API_KEY_ENV};
pub use oracle::OracleClient;
pub use parse::{parse_correction_response, parse_detection_response, Correction, DetectionResult};
pub use prompt::{build_correction_prompt, build_detection_prompt, CORRECTION_BASE, DETECTION_BASE};

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{Corpus, Instance};
use crate::error::{Error, Result};
use crate::quality::ErrorAnnotation;
use crate::tokenize::ws_tokens;

/// Detection result mapped back onto token indices, with the parts of the
/// response that could not be matched.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub annotation: ErrorAnnotation,
    /// Detector tokens that appear nowhere in the instance.
    pub hallucinated: Vec<String>,
    /// Pairs whose token text occurs more than once in the instance; the
    /// first unmatched occurrence was taken.
    pub ambiguous_matches: usize,
    pub identity_dropped: usize,
    pub parse_warning: bool,
}

/// Detects erroneous tokens in one instance.
///
/// The service returns token strings, not indices; each reported token is
/// matched to its first not-yet-matched occurrence, left to right.
/// Unmatched detector tokens are counted as hallucinations rather than
/// errors.
pub fn detect_errors(client: &dyn ChatClient, instance: &Instance) -> Result<DetectionOutcome> {
    let tokens = ws_tokens(&instance.text);
    if tokens.is_empty() {
        return Err(Error::Invalid(format!(
            "instance {} has no tokens to inspect",
            instance.instance_id
        )));
    }
    let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    let prompt = build_detection_prompt(&texts);
    let raw = client.complete(&ChatRequest {
        instance_id: &instance.instance_id,
        prompt: &prompt,
        instance_text: &instance.text,
    })?;
    let parsed = parse_detection_response(&raw);

    let mut occurrences: HashMap<&str, Vec<usize>> = HashMap::new();
    for t in &tokens {
        occurrences.entry(t.text.as_str()).or_default().push(t.index);
    }
    let mut used = vec![false; tokens.len()];
    let mut indices = std::collections::BTreeSet::new();
    let mut hallucinated = Vec::new();
    let mut ambiguous = 0usize;
    for (err_token, _) in &parsed.pairs {
        match occurrences.get(err_token.as_str()) {
            Some(slots) => {
                if slots.len() > 1 {
                    ambiguous += 1;
                }
                match slots.iter().find(|&&i| !used[i]) {
                    Some(&i) => {
                        used[i] = true;
                        indices.insert(i);
                    }
                    None => hallucinated.push(err_token.clone()),
                }
            }
            None => hallucinated.push(err_token.clone()),
        }
    }
    Ok(DetectionOutcome {
        annotation: ErrorAnnotation::new(instance.instance_id.clone(), indices, tokens.len())?,
        hallucinated,
        ambiguous_matches: ambiguous,
        identity_dropped: parsed.identity_dropped,
        parse_warning: parsed.parse_warning,
    })
}

/// Runs detection over a corpus with up to `parallelism` calls in flight.
/// Results come back in corpus order.
pub fn detect_corpus(
    client: &dyn ChatClient,
    corpus: &Corpus,
    parallelism: usize,
) -> Result<Vec<DetectionOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        corpus
            .instances
            .par_iter()
            .map(|inst| detect_errors(client, inst))
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct CorrectionSettings {
    pub parallelism: usize,
    /// The run fails when more than this fraction of instances error out.
    pub fail_threshold: f64,
}

impl Default for CorrectionSettings {
    fn default() -> Self {
        CorrectionSettings {
            parallelism: 1,
            fail_threshold: 0.1,
        }
    }
}

#[derive(Debug)]
pub struct CorrectionOutcome {
    pub corpus: Corpus,
    /// (instance_id, error) for instances whose correction failed; their
    /// text is left as it was.
    pub failures: Vec<(String, String)>,
    /// Instances the service answered `nil` for.
    pub unchanged: usize,
}

/// Rewrites every instance through the correction prompt.
///
/// Per-instance failures are collected instead of aborting; the run only
/// fails when the failure fraction exceeds the configured threshold.
pub fn correct_corpus(
    client: &dyn ChatClient,
    corpus: &Corpus,
    settings: &CorrectionSettings,
    model_name: &str,
) -> Result<CorrectionOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<(Instance, bool), (String, String)>> = pool.install(|| {
        corpus
            .instances
            .par_iter()
            .map(|inst| {
                let prompt = build_correction_prompt(&inst.text);
                let outcome = client
                    .complete(&ChatRequest {
                        instance_id: &inst.instance_id,
                        prompt: &prompt,
                        instance_text: &inst.text,
                    })
                    .and_then(|raw| parse_correction_response(&raw));
                match outcome {
                    Ok(Correction::Corrected(text)) => {
                        let mut out = inst.clone();
                        out.text = text;
                        Ok((out, false))
                    }
                    Ok(Correction::Unchanged) => Ok((inst.clone(), true)),
                    Err(e) => Err((inst.instance_id.clone(), e.to_string())),
                }
            })
            .collect()
    });

    let mut instances = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    let mut unchanged = 0usize;
    for (inst, result) in corpus.instances.iter().zip(results) {
        match result {
            Ok((corrected, was_nil)) => {
                unchanged += usize::from(was_nil);
                instances.push(corrected);
            }
            Err(failure) => {
                failures.push(failure);
                instances.push(inst.clone());
            }
        }
    }
    let allowed = (settings.fail_threshold * corpus.len() as f64).floor() as usize;
    if failures.len() > allowed {
        return Err(Error::Invalid(format!(
            "correction failed on {} of {} instances (threshold {})",
            failures.len(),
            corpus.len(),
            settings.fail_threshold
        )));
    }
    let metadata = crate::corpus::CorpusMetadata {
        name: corpus.metadata.name.clone(),
        seed: corpus.metadata.seed,
        provenance: format!(
            "{} | corrected by {model_name} at {}",
            corpus.metadata.provenance,
            chrono::Utc::now().to_rfc3339()
        ),
    };
    Ok(CorrectionOutcome {
        corpus: Corpus { instances, metadata },
        failures,
        unchanged,
    })
}
