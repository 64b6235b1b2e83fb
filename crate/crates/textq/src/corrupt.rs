//! Seeded error injection with a replayable ledger.
//!
//! Two error types are injected: misspellings (one character-level edit on
//! a letter position) and missing whitespace between adjacent tokens. The
//! requested rate splits randomly between the two, and merge sites favour
//! token pairs whose left token carries punctuation with 1.5x the weight
//! of plain pairs. Every decision is recorded in a [`CorruptionPlan`] so
//! the corruption can be re-quantified, scored against, and inverted.
//!
//! Determinism: each instance draws from a stream derived from
//! `(seed, instance_id)`, so corpus-level parallelism cannot change any
//! byte of the output.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::quality::ErrorAnnotation;
use crate::rng::stream;

pub const DEFAULT_PUNCT_WEIGHT: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MisspellOp {
    Substitute,
    Delete,
    Insert,
    Transpose,
}

pub const ALL_OPS: [MisspellOp; 4] = [
    MisspellOp::Substitute,
    MisspellOp::Delete,
    MisspellOp::Insert,
    MisspellOp::Transpose,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    /// Fraction of whitespace tokens to corrupt, in [0, 0.5].
    pub target_rate: f64,
    pub seed: u64,
    /// Sampling weight for merge sites whose left token has punctuation.
    pub punct_weight: f64,
    pub ops: Vec<MisspellOp>,
}

impl CorruptionConfig {
    pub fn new(target_rate: f64, seed: u64) -> Result<Self> {
        let config = CorruptionConfig {
            target_rate,
            seed,
            punct_weight: DEFAULT_PUNCT_WEIGHT,
            ops: ALL_OPS.to_vec(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.target_rate) {
            return Err(Error::Invalid(format!(
                "target_rate {} outside [0, 0.5]; merges consume token pairs",
                self.target_rate
            )));
        }
        if self.punct_weight < 1.0 {
            return Err(Error::Invalid(format!(
                "punct_weight {} must be >= 1",
                self.punct_weight
            )));
        }
        if self.ops.is_empty() {
            return Err(Error::Invalid("misspell op set is empty".into()));
        }
        Ok(())
    }
}

/// One in-place token replacement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisspellEdit {
    pub token_index: usize,
    pub original: String,
    pub corrupted: String,
}

/// One removed whitespace run between token `left_index` and its right
/// neighbour. The original texts and the exact run are kept so the merge
/// can be inverted byte-exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeSite {
    pub left_index: usize,
    pub left: String,
    pub right: String,
    pub removed_ws: String,
}

/// The seeded, replayable ledger of exactly what was corrupted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub instance_id: String,
    /// Whitespace token count of the text the plan was built from.
    pub total_tokens: usize,
    pub misspell_edits: Vec<MisspellEdit>,
    pub merge_sites: Vec<MergeSite>,
    /// Planned errors over original tokens.
    pub achieved_rate: f64,
    /// True when fewer sites were feasible than the target demanded.
    pub shortfall: bool,
}

impl CorruptionPlan {
    pub fn empty(instance_id: impl Into<String>, total_tokens: usize) -> Self {
        CorruptionPlan {
            instance_id: instance_id.into(),
            total_tokens,
            misspell_edits: Vec::new(),
            merge_sites: Vec::new(),
            achieved_rate: 0.0,
            shortfall: false,
        }
    }

    pub fn n_errors(&self) -> usize {
        self.misspell_edits.len() + self.merge_sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_errors() == 0
    }

    /// Error rate observed on the post-corruption token stream, where each
    /// merge shrinks the denominator by one token.
    pub fn post_stream_rate(&self) -> f64 {
        let post = self.total_tokens - self.merge_sites.len();
        if post == 0 {
            return 0.0;
        }
        self.n_errors() as f64 / post as f64
    }

    /// The ground-truth annotation over the post-corruption token stream.
    pub fn annotation(&self) -> Result<ErrorAnnotation> {
        let removed: Vec<usize> = self.merge_sites.iter().map(|m| m.left_index + 1).collect();
        let post_index = |orig: usize| -> usize {
            orig - removed.iter().filter(|&&r| r < orig).count()
        };
        let mut indices = std::collections::BTreeSet::new();
        for m in &self.merge_sites {
            indices.insert(post_index(m.left_index));
        }
        for e in &self.misspell_edits {
            indices.insert(post_index(e.token_index));
        }
        ErrorAnnotation::new(
            self.instance_id.clone(),
            indices,
            self.total_tokens - self.merge_sites.len(),
        )
    }
}

/// Text split into its leading whitespace and (token, trailing whitespace)
/// segments; concatenating everything back reproduces the input exactly.
pub(crate) fn segment_text(text: &str) -> (String, Vec<(String, String)>) {
    let mut leading = String::new();
    let mut segments: Vec<(String, String)> = Vec::new();
    let mut token = String::new();
    let mut ws = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            if token.is_empty() && segments.is_empty() {
                leading.push(c);
            } else if token.is_empty() {
                segments.last_mut().unwrap().1.push(c);
            } else {
                ws.push(c);
                segments.push((std::mem::take(&mut token), std::mem::take(&mut ws)));
            }
        } else {
            if !ws.is_empty() {
                // unreachable: ws is always flushed with its token
                ws.clear();
            }
            token.push(c);
        }
    }
    if !token.is_empty() {
        segments.push((token, String::new()));
    }
    (leading, segments)
}

fn has_punct(token: &str) -> bool {
    token.chars().any(|c| !c.is_alphanumeric())
}

fn has_letter(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_alphabetic())
}

/// Splits a target rate into (misspell_rate, merge_rate); the split
/// fraction is uniform on [0, 1].
pub fn split_rates(target_rate: f64, rng: &mut impl Rng) -> (f64, f64) {
    let f: f64 = rng.random();
    (f * target_rate, (1.0 - f) * target_rate)
}

/// Draws `want` merge sites (left token indices) without replacement.
///
/// A site whose left token contains punctuation carries `punct_weight`,
/// plain sites carry 1. Sites adjacent to a drawn site are removed from
/// the pool so no token takes part in two merges.
pub fn select_merge_sites(
    tokens: &[(String, bool)],
    want: usize,
    punct_weight: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = tokens.len();
    if n < 2 || want == 0 {
        return Vec::new();
    }
    let mut pool: Vec<usize> = (0..n - 1).collect();
    let weight = |site: usize| if tokens[site].1 { punct_weight } else { 1.0 };
    let mut picked = Vec::with_capacity(want);
    while picked.len() < want && !pool.is_empty() {
        let total: f64 = pool.iter().map(|&s| weight(s)).sum();
        let mut x = rng.random::<f64>() * total;
        let mut chosen = pool[pool.len() - 1];
        for &s in &pool {
            x -= weight(s);
            if x <= 0.0 {
                chosen = s;
                break;
            }
        }
        picked.push(chosen);
        pool.retain(|&s| s + 1 < chosen || s > chosen + 1);
    }
    picked
}

/// Applies one random character-level edit to a letter position.
///
/// The result differs from the input by exactly one edit: a substituted,
/// deleted, or inserted letter, or a transposition of adjacent distinct
/// letters. Punctuation and digits are never touched. Infeasible draws
/// (delete on a single-letter token, transpose with no eligible pair)
/// redraw another op.
pub fn misspell(token: &str, rng: &mut impl Rng, ops: &[MisspellOp]) -> Result<String> {
    let chars: Vec<char> = token.chars().collect();
    let letters: Vec<usize> = chars
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .collect();
    if letters.is_empty() {
        return Err(Error::Invalid(format!(
            "token {token:?} has no letters to misspell"
        )));
    }
    if ops.is_empty() {
        return Err(Error::Invalid("misspell op set is empty".into()));
    }
    const ALPHABET: [char; 26] = [
        'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q',
        'r', 's', 't', 'u', 'v', 'w', 'x', 'y', 'z',
    ];
    for _ in 0..32 {
        let op = ops[rng.random_range(0..ops.len())];
        match op {
            MisspellOp::Substitute => {
                let pos = letters[rng.random_range(0..letters.len())];
                let candidates: Vec<char> =
                    ALPHABET.iter().copied().filter(|&c| c != chars[pos]).collect();
                let mut out = chars.clone();
                out[pos] = candidates[rng.random_range(0..candidates.len())];
                return Ok(out.into_iter().collect());
            }
            MisspellOp::Delete => {
                if letters.len() < 2 {
                    continue;
                }
                let pos = letters[rng.random_range(0..letters.len())];
                let mut out = chars.clone();
                out.remove(pos);
                return Ok(out.into_iter().collect());
            }
            MisspellOp::Insert => {
                // Insertion points touching a letter: before or after one.
                let mut points: Vec<usize> = letters.iter().flat_map(|&p| [p, p + 1]).collect();
                points.sort_unstable();
                points.dedup();
                let pos = points[rng.random_range(0..points.len())];
                let mut out = chars.clone();
                out.insert(pos, ALPHABET[rng.random_range(0..26)]);
                return Ok(out.into_iter().collect());
            }
            MisspellOp::Transpose => {
                let pairs: Vec<usize> = (0..chars.len().saturating_sub(1))
                    .filter(|&i| {
                        chars[i].is_ascii_alphabetic()
                            && chars[i + 1].is_ascii_alphabetic()
                            && chars[i] != chars[i + 1]
                    })
                    .collect();
                if pairs.is_empty() {
                    continue;
                }
                let i = pairs[rng.random_range(0..pairs.len())];
                let mut out = chars.clone();
                out.swap(i, i + 1);
                return Ok(out.into_iter().collect());
            }
        }
    }
    // Substitution is always feasible; fall back to it.
    let pos = letters[rng.random_range(0..letters.len())];
    let candidates: Vec<char> = ALPHABET.iter().copied().filter(|&c| c != chars[pos]).collect();
    let mut out = chars;
    out[pos] = candidates[rng.random_range(0..candidates.len())];
    Ok(out.into_iter().collect())
}

/// Plans the corruption of one instance at the configured rate.
///
/// `n_errors = round_ties_even(target_rate * N)` over the original token
/// count N, split between misspells and merges by a uniform fraction.
/// Merge sites are drawn first (punctuation-weighted, non-adjacent);
/// misspell targets are drawn uniformly from the remaining letter-bearing
/// tokens. When fewer sites are feasible than requested, the plan clamps
/// and sets the shortfall flag.
pub fn plan_corruption(
    text: &str,
    config: &CorruptionConfig,
    instance_id: &str,
) -> Result<CorruptionPlan> {
    config.validate()?;
    let (_, segments) = segment_text(text);
    let n = segments.len();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "instance {instance_id} has {n} tokens; need at least 2 to corrupt"
        )));
    }
    let mut rng = stream(config.seed, &format!("plan:{instance_id}"));
    let n_errors = (config.target_rate * n as f64).round_ties_even() as usize;
    if n_errors == 0 {
        return Ok(CorruptionPlan::empty(instance_id, n));
    }

    let (mis_rate, _) = split_rates(config.target_rate, &mut rng);
    let mis_fraction = mis_rate / config.target_rate;
    let mis_quota = (mis_fraction * n_errors as f64).round_ties_even() as usize;
    let merge_quota = n_errors - mis_quota;

    let tokens: Vec<(String, bool)> = segments
        .iter()
        .map(|(t, _)| (t.clone(), has_punct(t)))
        .collect();
    let merge_lefts = select_merge_sites(&tokens, merge_quota, config.punct_weight, &mut rng);

    // Any merge shortfall tops up the misspell quota.
    let mis_quota = mis_quota + (merge_quota - merge_lefts.len());

    let mut merged_tokens: Vec<bool> = vec![false; n];
    for &left in &merge_lefts {
        merged_tokens[left] = true;
        merged_tokens[left + 1] = true;
    }
    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| !merged_tokens[i] && has_letter(&tokens[i].0))
        .collect();
    // Partial Fisher-Yates: uniform without replacement, deterministic.
    let take = mis_quota.min(candidates.len());
    let mut mis_targets = Vec::with_capacity(take);
    for k in 0..take {
        let j = rng.random_range(k..candidates.len());
        candidates.swap(k, j);
        mis_targets.push(candidates[k]);
    }

    let mut misspell_edits = Vec::with_capacity(mis_targets.len());
    for &idx in &mis_targets {
        let original = tokens[idx].0.clone();
        let corrupted = misspell(&original, &mut rng, &config.ops)?;
        misspell_edits.push(MisspellEdit {
            token_index: idx,
            original,
            corrupted,
        });
    }
    misspell_edits.sort_by_key(|e| e.token_index);

    let mut merge_sites: Vec<MergeSite> = merge_lefts
        .iter()
        .map(|&left| MergeSite {
            left_index: left,
            left: segments[left].0.clone(),
            right: segments[left + 1].0.clone(),
            removed_ws: segments[left].1.clone(),
        })
        .collect();
    merge_sites.sort_by_key(|m| m.left_index);

    let planned = misspell_edits.len() + merge_sites.len();
    Ok(CorruptionPlan {
        instance_id: instance_id.to_string(),
        total_tokens: n,
        misspell_edits,
        merge_sites,
        achieved_rate: planned as f64 / n as f64,
        shortfall: planned < n_errors,
    })
}

/// Applies a plan to the exact text it was built from.
///
/// Misspelled tokens are replaced in place; each merge site removes
/// exactly the whitespace run between its two tokens. Every other byte is
/// preserved. A plan built from different text is rejected.
pub fn apply_plan(text: &str, plan: &CorruptionPlan) -> Result<String> {
    let (leading, segments) = segment_text(text);
    if segments.len() != plan.total_tokens {
        return Err(Error::PlanMismatch(format!(
            "{}: plan covers {} tokens, text has {}",
            plan.instance_id,
            plan.total_tokens,
            segments.len()
        )));
    }
    let mut edits: HashMap<usize, &MisspellEdit> = HashMap::new();
    for e in &plan.misspell_edits {
        if segments[e.token_index].0 != e.original {
            return Err(Error::PlanMismatch(format!(
                "{}: token {} is {:?}, plan expected {:?}",
                plan.instance_id, e.token_index, segments[e.token_index].0, e.original
            )));
        }
        if e.original == e.corrupted {
            return Err(Error::PlanMismatch(format!(
                "{}: edit at {} does not change the token",
                plan.instance_id, e.token_index
            )));
        }
        edits.insert(e.token_index, e);
    }
    let mut merges: BTreeMap<usize, &MergeSite> = BTreeMap::new();
    for m in &plan.merge_sites {
        if m.left_index + 1 >= segments.len() {
            return Err(Error::PlanMismatch(format!(
                "{}: merge site {} out of range",
                plan.instance_id, m.left_index
            )));
        }
        if segments[m.left_index].0 != m.left
            || segments[m.left_index + 1].0 != m.right
            || segments[m.left_index].1 != m.removed_ws
        {
            return Err(Error::PlanMismatch(format!(
                "{}: merge site {} does not match the text",
                plan.instance_id, m.left_index
            )));
        }
        merges.insert(m.left_index, m);
    }

    let mut out = leading;
    let mut i = 0;
    while i < segments.len() {
        if merges.contains_key(&i) {
            out.push_str(&segments[i].0);
            out.push_str(&segments[i + 1].0);
            out.push_str(&segments[i + 1].1);
            i += 2;
        } else {
            match edits.get(&i) {
                Some(e) => out.push_str(&e.corrupted),
                None => out.push_str(&segments[i].0),
            }
            out.push_str(&segments[i].1);
            i += 1;
        }
    }
    Ok(out)
}

/// Reconstructs the original text from corrupted text and its plan.
pub fn invert_plan(corrupted: &str, plan: &CorruptionPlan) -> Result<String> {
    let (leading, segments) = segment_text(corrupted);
    let expected = plan.total_tokens - plan.merge_sites.len();
    if segments.len() != expected {
        return Err(Error::PlanMismatch(format!(
            "{}: corrupted text has {} tokens, plan implies {}",
            plan.instance_id,
            segments.len(),
            expected
        )));
    }
    let edits: HashMap<usize, &MisspellEdit> = plan
        .misspell_edits
        .iter()
        .map(|e| (e.token_index, e))
        .collect();
    let merges: HashMap<usize, &MergeSite> =
        plan.merge_sites.iter().map(|m| (m.left_index, m)).collect();

    let mut out = leading;
    let mut orig = 0usize;
    let mut post = 0usize;
    while orig < plan.total_tokens {
        let (token, ws) = &segments[post];
        if let Some(m) = merges.get(&orig) {
            let joined = format!("{}{}", m.left, m.right);
            if *token != joined {
                return Err(Error::PlanMismatch(format!(
                    "{}: merged token at {} is {:?}, plan implies {:?}",
                    plan.instance_id, post, token, joined
                )));
            }
            out.push_str(&m.left);
            out.push_str(&m.removed_ws);
            out.push_str(&m.right);
            orig += 2;
        } else if let Some(e) = edits.get(&orig) {
            if *token != e.corrupted {
                return Err(Error::PlanMismatch(format!(
                    "{}: token at {} is {:?}, plan implies corrupted {:?}",
                    plan.instance_id, post, token, e.corrupted
                )));
            }
            out.push_str(&e.original);
            orig += 1;
        } else {
            out.push_str(token);
            orig += 1;
        }
        out.push_str(ws);
        post += 1;
    }
    Ok(out)
}

/// Re-quantification of corrupted text against its ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Requantification {
    /// Token count of the corrupted stream.
    pub post_tokens: usize,
    pub erroneous_tokens: usize,
    pub merges: usize,
    /// Erroneous over post-corruption tokens (denominator shrunk by merges).
    pub post_rate: f64,
    /// Erroneous over original tokens, reconstructing the pre-corruption
    /// denominator from the ledger (`post_tokens + merges`).
    pub original_rate: f64,
}

/// Re-tokenizes corrupted text and checks it against the plan: the token
/// count must equal `total - merges` and every planned error must sit at
/// its shifted index with the planned text.
pub fn requantify(corrupted: &str, plan: &CorruptionPlan) -> Result<Requantification> {
    let (_, segments) = segment_text(corrupted);
    let annotation = plan.annotation()?;
    if segments.len() != annotation.total_tokens {
        return Err(Error::PlanMismatch(format!(
            "{}: corrupted stream has {} tokens, ledger implies {}",
            plan.instance_id,
            segments.len(),
            annotation.total_tokens
        )));
    }
    // Confirm the ledger's erroneous tokens appear where it says they do.
    let removed: Vec<usize> = plan.merge_sites.iter().map(|m| m.left_index + 1).collect();
    let post_index = |o: usize| o - removed.iter().filter(|&&r| r < o).count();
    for m in &plan.merge_sites {
        let at = post_index(m.left_index);
        let joined = format!("{}{}", m.left, m.right);
        if segments[at].0 != joined {
            return Err(Error::PlanMismatch(format!(
                "{}: expected merged token {joined:?} at {at}",
                plan.instance_id
            )));
        }
    }
    for e in &plan.misspell_edits {
        let at = post_index(e.token_index);
        if segments[at].0 != e.corrupted {
            return Err(Error::PlanMismatch(format!(
                "{}: expected misspelt token {:?} at {at}",
                plan.instance_id, e.corrupted
            )));
        }
    }
    let erroneous = plan.n_errors();
    let merges = plan.merge_sites.len();
    let post_tokens = segments.len();
    Ok(Requantification {
        post_tokens,
        erroneous_tokens: erroneous,
        merges,
        post_rate: erroneous as f64 / post_tokens as f64,
        original_rate: erroneous as f64 / (post_tokens + merges) as f64,
    })
}

/// Corrupts a whole corpus in parallel; instance order is preserved and
/// output is byte-identical for a given config regardless of worker count.
///
/// Instances with fewer than two tokens cannot host an error and receive
/// an empty plan (flagged as shortfall when the target rate is positive).
pub fn corrupt_corpus(
    corpus: &Corpus,
    config: &CorruptionConfig,
) -> Result<(Corpus, Vec<CorruptionPlan>)> {
    config.validate()?;
    let results: Vec<(crate::corpus::Instance, CorruptionPlan)> = corpus
        .instances
        .par_iter()
        .map(|inst| -> Result<_> {
            let n = crate::tokenize::ws_token_count(&inst.text);
            if n < 2 {
                let mut plan = CorruptionPlan::empty(&inst.instance_id, n);
                plan.shortfall = config.target_rate > 0.0
                    && (config.target_rate * n as f64).round_ties_even() as usize > 0;
                return Ok((inst.clone(), plan));
            }
            let plan = plan_corruption(&inst.text, config, &inst.instance_id)?;
            let corrupted = apply_plan(&inst.text, &plan)?;
            let mut out = inst.clone();
            out.text = corrupted;
            Ok((out, plan))
        })
        .collect::<Result<_>>()?;
    let (instances, plans): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let metadata = crate::corpus::CorpusMetadata {
        name: corpus.metadata.name.clone(),
        seed: Some(config.seed),
        provenance: format!(
            "{} | corrupted target_rate={} seed={} punct_weight={}",
            corpus.metadata.provenance, config.target_rate, config.seed, config.punct_weight
        ),
    };
    Ok((Corpus { instances, metadata }, plans))
}

/// Writes plans as a JSONL ledger, one plan per instance.
pub fn save_plans(plans: &[CorruptionPlan], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for plan in plans {
        let json =
            serde_json::to_string(plan).map_err(|e| Error::Invalid(format!("serialize: {e}")))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_plans(path: &Path) -> Result<Vec<CorruptionPlan>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let plan: CorruptionPlan =
            serde_json::from_str(&line).map_err(|e| Error::line(path, i + 1, e.to_string()))?;
        out.push(plan);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::ws_tokens;
    use proptest::prelude::*;

    fn config(rate: f64, seed: u64) -> CorruptionConfig {
        CorruptionConfig::new(rate, seed).unwrap()
    }

    /// Damerau-Levenshtein (optimal string alignment) distance; the
    /// independent oracle for single-edit misspellings, where a
    /// transposition counts as one edit.
    fn edit_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let (n, m) = (a.len(), b.len());
        let mut d = vec![vec![0usize; m + 1]; n + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=m {
            d[0][j] = j;
        }
        for i in 1..=n {
            for j in 1..=m {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = (d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1)
                    .min(d[i - 1][j - 1] + cost);
                if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                    d[i][j] = d[i][j].min(d[i - 2][j - 2] + 1);
                }
            }
        }
        d[n][m]
    }

    #[test]
    fn segments_round_trip() {
        for text in ["a b  c", "  lead", "trail  ", "one", "", "a\n\tb "] {
            let (lead, segs) = segment_text(text);
            let mut rebuilt = lead;
            for (t, w) in segs {
                rebuilt.push_str(&t);
                rebuilt.push_str(&w);
            }
            assert_eq!(rebuilt, text);
        }
    }

    #[test]
    fn split_rates_sum_to_target() {
        let mut rng = stream(1, "split");
        for _ in 0..100 {
            let (a, b) = split_rates(0.1, &mut rng);
            assert!((a + b - 0.1).abs() < 1e-15);
            assert!(a >= 0.0 && b >= 0.0);
        }
        let (a, b) = split_rates(0.0, &mut rng);
        assert_eq!((a, b), (0.0, 0.0));
    }

    // KS oracle: the split fraction is uniform on [0,1].
    #[test]
    fn split_fraction_uniform_by_ks() {
        let mut rng = stream(2, "split-ks");
        let n = 10_000;
        let mut fractions: Vec<f64> = (0..n)
            .map(|_| {
                let (a, _) = split_rates(0.2, &mut rng);
                a / 0.2
            })
            .collect();
        fractions.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut d: f64 = 0.0;
        for (i, f) in fractions.iter().enumerate() {
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d = d.max((f - lo).abs()).max((hi - f).abs());
        }
        // Critical value at alpha = 0.001 for n = 10000: 1.949 / sqrt(n).
        assert!(d < 1.949 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn zero_rate_plans_nothing() {
        let plan = plan_corruption("some clean text here", &config(0.0, 7), "i0").unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.achieved_rate, 0.0);
        let out = apply_plan("some clean text here", &plan).unwrap();
        assert_eq!(out, "some clean text here");
    }

    #[test]
    fn hundred_tokens_at_ten_percent_plans_ten_errors() {
        let text = (0..100).map(|i| format!("tok{i}")).collect::<Vec<_>>().join(" ");
        let plan = plan_corruption(&text, &config(0.10, 3), "i0").unwrap();
        assert_eq!(plan.n_errors(), 10);
        assert_eq!(plan.achieved_rate, 0.1);
        assert!(!plan.shortfall);
    }

    #[test]
    fn achieved_rate_is_exact_rounding() {
        let text = (0..33).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let plan = plan_corruption(&text, &config(0.10, 9), "i0").unwrap();
        let expect = (0.10f64 * 33.0).round_ties_even() / 33.0;
        assert_eq!(plan.achieved_rate, expect);
    }

    #[test]
    fn too_few_tokens_rejected() {
        assert!(plan_corruption("single", &config(0.1, 1), "i0").is_err());
    }

    #[test]
    fn misspell_single_edit_distance() {
        let mut rng = stream(4, "misspell");
        // One fixed example in the spirit of a doubled letter.
        let out = misspell("occasions", &mut rng, &ALL_OPS).unwrap();
        assert_eq!(edit_distance("occasions", &out), 1);
        assert_ne!(out, "occasions");
    }

    // Levenshtein DP oracle over random tokens and op subsets.
    #[test]
    fn misspell_always_one_edit() {
        use rand::Rng;
        let mut rng = stream(5, "misspell-oracle");
        let op_sets: Vec<Vec<MisspellOp>> = vec![
            ALL_OPS.to_vec(),
            vec![MisspellOp::Substitute],
            vec![MisspellOp::Delete],
            vec![MisspellOp::Insert],
            vec![MisspellOp::Transpose],
        ];
        for i in 0..1000 {
            let len = rng.random_range(1..12);
            let token: String = (0..len)
                .map(|_| {
                    let r: f64 = rng.random();
                    if r < 0.8 {
                        char::from(b'a' + rng.random_range(0..26u8))
                    } else if r < 0.9 {
                        char::from(b'0' + rng.random_range(0..10u8))
                    } else {
                        ','
                    }
                })
                .collect();
            if !token.chars().any(|c| c.is_ascii_alphabetic()) {
                continue;
            }
            let ops = &op_sets[i % op_sets.len()];
            let out = misspell(&token, &mut rng, ops).unwrap();
            assert_ne!(out, token, "op set {ops:?} on {token:?}");
            assert_eq!(edit_distance(&token, &out), 1, "{token:?} -> {out:?}");
            // punctuation and digits survive untouched
            let non_letters = |s: &str| -> Vec<char> {
                s.chars().filter(|c| !c.is_ascii_alphabetic()).collect()
            };
            assert_eq!(non_letters(&token), non_letters(&out));
        }
    }

    #[test]
    fn misspell_without_letters_rejected() {
        let mut rng = stream(6, "misspell-none");
        assert!(misspell("123,", &mut rng, &ALL_OPS).is_err());
    }

    #[test]
    fn single_merge_joins_pair() {
        let text = "lounge chair";
        let plan = CorruptionPlan {
            instance_id: "i".into(),
            total_tokens: 2,
            misspell_edits: vec![],
            merge_sites: vec![MergeSite {
                left_index: 0,
                left: "lounge".into(),
                right: "chair".into(),
                removed_ws: " ".into(),
            }],
            achieved_rate: 0.5,
            shortfall: false,
        };
        assert_eq!(apply_plan(text, &plan).unwrap(), "loungechair");
        assert_eq!(invert_plan("loungechair", &plan).unwrap(), text);
    }

    #[test]
    fn empty_plan_is_identity() {
        let text = "a few tokens  here\nnewline";
        let plan = CorruptionPlan::empty("i", 5);
        assert_eq!(apply_plan(text, &plan).unwrap(), text);
    }

    #[test]
    fn plan_from_other_text_rejected() {
        let plan = plan_corruption("one two three four", &config(0.5, 8), "i0").unwrap();
        assert!(apply_plan("totally different text now", &plan).is_err());
    }

    #[test]
    fn merge_reduces_token_count_by_n_merge() {
        let text: String = (0..60).map(|i| format!("w{i},")).collect::<Vec<_>>().join(" ");
        let plan = plan_corruption(&text, &config(0.25, 11), "i0").unwrap();
        let corrupted = apply_plan(&text, &plan).unwrap();
        assert_eq!(
            ws_tokens(&corrupted).len(),
            plan.total_tokens - plan.merge_sites.len()
        );
    }

    #[test]
    fn merge_sites_never_adjacent() {
        for seed in 0..20 {
            let text: String = (0..40).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ");
            let plan = plan_corruption(&text, &config(0.5, seed), "i0").unwrap();
            let mut lefts: Vec<usize> = plan.merge_sites.iter().map(|m| m.left_index).collect();
            lefts.sort_unstable();
            for w in lefts.windows(2) {
                assert!(w[1] > w[0] + 1, "adjacent merge sites {lefts:?}");
            }
            // misspell edits never touch merged tokens
            let merged: Vec<usize> = plan
                .merge_sites
                .iter()
                .flat_map(|m| [m.left_index, m.left_index + 1])
                .collect();
            for e in &plan.misspell_edits {
                assert!(!merged.contains(&e.token_index));
            }
        }
    }

    // Re-quantification oracle: rates measured back off the corrupted
    // stream stay within 2 percentage points of the target.
    #[test]
    fn requantified_rate_near_target() {
        let text: String = (0..120)
            .map(|i| if i % 9 == 0 { format!("w{i},") } else { format!("w{i}") })
            .collect::<Vec<_>>()
            .join(" ");
        for (seed, target) in [(1u64, 0.05), (2, 0.10), (3, 0.10), (4, 0.05)] {
            let plan = plan_corruption(&text, &config(target, seed), "i0").unwrap();
            let corrupted = apply_plan(&text, &plan).unwrap();
            let q = requantify(&corrupted, &plan).unwrap();
            assert!(
                (q.post_rate - target).abs() <= 0.02,
                "post rate {} vs target {target}",
                q.post_rate
            );
            assert!((q.original_rate - target).abs() <= 0.005);
            assert_eq!(q.post_tokens, plan.total_tokens - q.merges);
        }
    }

    #[test]
    fn inversion_restores_original() {
        let text = "Resident sitting in the lounge area with fellow residents,while \
                    sitting Resident was picking at her scores on her legs.\nSecond note";
        for seed in 0..10 {
            let plan = plan_corruption(text, &config(0.3, seed), "i0").unwrap();
            let corrupted = apply_plan(text, &plan).unwrap();
            assert_eq!(invert_plan(&corrupted, &plan).unwrap(), text);
        }
    }

    #[test]
    fn annotation_matches_corrupted_stream() {
        let text: String = (0..80).map(|i| format!("tok{i}")).collect::<Vec<_>>().join(" ");
        let plan = plan_corruption(&text, &config(0.2, 21), "i0").unwrap();
        let corrupted = apply_plan(&text, &plan).unwrap();
        let ann = plan.annotation().unwrap();
        let toks = ws_tokens(&corrupted);
        assert_eq!(toks.len(), ann.total_tokens);
        assert_eq!(ann.erroneous_indices.len(), plan.n_errors());
        // Every flagged index holds exactly the planned corrupted text.
        let mut expected: Vec<(usize, String)> = plan
            .merge_sites
            .iter()
            .map(|m| (m.left_index, format!("{}{}", m.left, m.right)))
            .chain(plan.misspell_edits.iter().map(|e| (e.token_index, e.corrupted.clone())))
            .collect();
        expected.sort_by_key(|(i, _)| *i);
        let removed: Vec<usize> = plan.merge_sites.iter().map(|m| m.left_index + 1).collect();
        for (orig_idx, text) in expected {
            let post = orig_idx - removed.iter().filter(|&&r| r < orig_idx).count();
            assert!(ann.erroneous_indices.contains(&post));
            assert_eq!(toks[post].text, text);
        }
    }

    #[test]
    fn corpus_corruption_deterministic() {
        let corpus = crate::experiment::make_synthetic_corpus(30, 40, 1.0, 17).unwrap();
        let cfg = config(0.15, 99);
        let (a, plans_a) = corrupt_corpus(&corpus, &cfg).unwrap();
        let (b, plans_b) = corrupt_corpus(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(plans_a, plans_b);
        // independent of worker count
        let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
        let (c, plans_c) = pool.install(|| corrupt_corpus(&corpus, &cfg)).unwrap();
        assert_eq!(a, c);
        assert_eq!(plans_a, plans_c);
    }

    #[test]
    fn ledger_round_trip() {
        let text: String = (0..50).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let plans: Vec<CorruptionPlan> = (0..5)
            .map(|i| plan_corruption(&text, &config(0.2, i), &format!("i{i}")).unwrap())
            .collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_plans(&plans, f.path()).unwrap();
        assert_eq!(load_plans(f.path()).unwrap(), plans);
    }

    // Ledger union is monotone: corrupting again never shrinks the error set.
    #[test]
    fn sequential_corruption_monotone() {
        let text: String = (0..100).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        for seed in 0..10 {
            let p1 = plan_corruption(&text, &config(0.1, seed), "i0").unwrap();
            let c1 = apply_plan(&text, &p1).unwrap();
            let p2 = plan_corruption(&c1, &config(0.1, seed + 1000), "i0").unwrap();
            let c2 = apply_plan(&c1, &p2).unwrap();
            assert!(p1.n_errors() + p2.n_errors() >= p1.n_errors());
            assert_eq!(
                ws_tokens(&c2).len(),
                ws_tokens(&text).len() - p1.merge_sites.len() - p2.merge_sites.len()
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn corruption_pipeline_invariants(
            words in proptest::collection::vec("[a-zA-Z]{2,8},?", 4..60),
            rate in 0.0f64..0.5,
            seed in 0u64..1000,
        ) {
            let text = words.join(" ");
            let cfg = CorruptionConfig { target_rate: rate, seed, punct_weight: 1.5, ops: ALL_OPS.to_vec() };
            let plan = plan_corruption(&text, &cfg, "p").unwrap();
            let corrupted = apply_plan(&text, &plan).unwrap();

            // token count shrinks exactly by the merge count
            prop_assert_eq!(
                ws_tokens(&corrupted).len(),
                ws_tokens(&text).len() - plan.merge_sites.len()
            );

            // untouched tokens appear unchanged at their shifted index
            let removed: Vec<usize> = plan.merge_sites.iter().map(|m| m.left_index + 1).collect();
            let touched: std::collections::HashSet<usize> = plan
                .misspell_edits.iter().map(|e| e.token_index)
                .chain(plan.merge_sites.iter().flat_map(|m| [m.left_index, m.left_index + 1]))
                .collect();
            let post = ws_tokens(&corrupted);
            let orig = ws_tokens(&text);
            for t in &orig {
                if !touched.contains(&t.index) {
                    let shift = removed.iter().filter(|&&r| r < t.index).count();
                    prop_assert_eq!(&post[t.index - shift].text, &t.text);
                }
            }

            // seeded determinism
            let plan2 = plan_corruption(&text, &cfg, "p").unwrap();
            prop_assert_eq!(&plan, &plan2);
            prop_assert_eq!(apply_plan(&text, &plan2).unwrap(), corrupted.clone());

            // inversion restores the original bytes
            prop_assert_eq!(invert_plan(&corrupted, &plan).unwrap(), text.clone());

            // requantification agrees with the ledger
            let q = requantify(&corrupted, &plan).unwrap();
            prop_assert_eq!(q.erroneous_tokens, plan.n_errors());
            if !plan.shortfall {
                let n = orig.len() as f64;
                let expect = (rate * n).round_ties_even() / n;
                prop_assert!((plan.achieved_rate - expect).abs() < 1e-12);
            }
        }
    }
}
