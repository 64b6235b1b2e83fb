//! Labeled note corpora: JSONL ingestion, per-subject concatenation, and
//! tracking-window sampling around event anchors.
//!
//! The interchange format is JSONL, one object per line, with fields
//! `{note_id?, subject_id?, timestamp?, text, label?, window_days?}` and
//! RFC 3339 timestamps. A file can hold either ready-made prediction
//! instances (one per line, label required) or raw notes that get grouped
//! by subject and concatenated chronologically.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// A timestamped free-text record attached to a subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Note {
    pub note_id: String,
    pub subject_id: String,
    pub timestamp: Option<DateTime<Utc>>,
    pub text: String,
}

/// One prediction instance: concatenated note text plus a binary outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    pub subject_id: String,
    pub text: String,
    pub label: u8,
    pub window_days: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub name: String,
    pub seed: Option<u64>,
    pub provenance: String,
}

/// An ordered collection of instances with provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub instances: Vec<Instance>,
    pub metadata: CorpusMetadata,
}

/// How a JSONL file maps onto a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// One instance per line; `label` is required on every line.
    Instances,
    /// One note per line; notes are grouped per subject and concatenated.
    Notes,
}

/// Wire format of one JSONL line.
#[derive(Debug, Serialize, Deserialize)]
struct RawLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<DateTime<Utc>>,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window_days: Option<u32>,
}

impl Corpus {
    pub fn new(instances: Vec<Instance>, metadata: CorpusMetadata) -> Result<Self> {
        let corpus = Corpus { instances, metadata };
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for inst in &self.instances {
            if inst.text.trim().is_empty() {
                return Err(Error::Invalid(format!(
                    "instance {} has empty text",
                    inst.instance_id
                )));
            }
            if inst.label > 1 {
                return Err(Error::Invalid(format!(
                    "instance {} has label {} outside {{0,1}}",
                    inst.instance_id, inst.label
                )));
            }
            if !seen.insert(&inst.instance_id) {
                return Err(Error::Invalid(format!(
                    "duplicate instance_id {}",
                    inst.instance_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Writes one JSON object per instance; `note_id` carries the instance id.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for inst in &self.instances {
            let line = RawLine {
                note_id: Some(inst.instance_id.clone()),
                subject_id: Some(inst.subject_id.clone()),
                timestamp: None,
                text: inst.text.clone(),
                label: Some(inst.label),
                window_days: inst.window_days,
            };
            let json = serde_json::to_string(&line)
                .map_err(|e| Error::Invalid(format!("serialize: {e}")))?;
            writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Loads a JSONL corpus file.
///
/// In [`LoadMode::Instances`] each line becomes one instance; ids default
/// to `line<N>` when absent. In [`LoadMode::Notes`] lines are notes,
/// grouped per `subject_id` and concatenated chronologically; the subject
/// label must be carried by at least one of its notes and must not
/// conflict across them.
pub fn load_corpus(path: &Path, mode: LoadMode) -> Result<Corpus> {
    let metadata = CorpusMetadata {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        seed: None,
        provenance: format!("loaded from {}", path.display()),
    };
    match mode {
        LoadMode::Instances => {
            let mut instances = Vec::new();
            for (lineno, line) in read_lines(path)? {
                let raw = parse_line(path, lineno, &line)?;
                let label = raw.label.ok_or_else(|| {
                    Error::line(path, lineno, "missing \"label\" in instance mode")
                })?;
                let instance_id = raw.note_id.unwrap_or_else(|| format!("line{lineno}"));
                let subject_id = raw.subject_id.unwrap_or_else(|| instance_id.clone());
                instances.push(Instance {
                    instance_id,
                    subject_id,
                    text: raw.text,
                    label,
                    window_days: raw.window_days,
                });
            }
            Corpus::new(instances, metadata)
        }
        LoadMode::Notes => {
            let notes_and_labels = load_notes_with_labels(path)?;
            // BTreeMap keeps subject order stable across runs.
            let mut by_subject: BTreeMap<String, (Vec<Note>, Option<u8>)> = BTreeMap::new();
            for (lineno, note, label) in notes_and_labels {
                let entry = by_subject
                    .entry(note.subject_id.clone())
                    .or_insert_with(|| (Vec::new(), None));
                if let Some(l) = label {
                    match entry.1 {
                        Some(prev) if prev != l => {
                            return Err(Error::line(
                                path,
                                lineno,
                                format!("conflicting labels for subject {}", note.subject_id),
                            ));
                        }
                        _ => entry.1 = Some(l),
                    }
                }
                entry.0.push(note);
            }
            let mut instances = Vec::new();
            for (subject_id, (notes, label)) in by_subject {
                let label = label.ok_or_else(|| {
                    Error::Invalid(format!("subject {subject_id} has no labeled note"))
                })?;
                let text = concat_subject_notes(&notes)?;
                instances.push(Instance {
                    instance_id: subject_id.clone(),
                    subject_id,
                    text,
                    label,
                    window_days: None,
                });
            }
            Corpus::new(instances, metadata)
        }
    }
}

/// Loads raw notes, one per line; labels on note lines are ignored here.
pub fn load_notes(path: &Path) -> Result<Vec<Note>> {
    Ok(load_notes_with_labels(path)?
        .into_iter()
        .map(|(_, note, _)| note)
        .collect())
}

fn load_notes_with_labels(path: &Path) -> Result<Vec<(usize, Note, Option<u8>)>> {
    let mut out = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let raw = parse_line(path, lineno, &line)?;
        if raw.text.trim().is_empty() {
            return Err(Error::line(path, lineno, "empty \"text\""));
        }
        let note_id = raw.note_id.unwrap_or_else(|| format!("line{lineno}"));
        let subject_id = raw.subject_id.unwrap_or_else(|| note_id.clone());
        out.push((
            lineno,
            Note {
                note_id,
                subject_id,
                timestamp: raw.timestamp,
                text: raw.text,
            },
            raw.label,
        ));
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((i + 1, line));
    }
    Ok(out)
}

fn parse_line(path: &Path, lineno: usize, line: &str) -> Result<RawLine> {
    let raw: RawLine =
        serde_json::from_str(line).map_err(|e| Error::line(path, lineno, e.to_string()))?;
    if raw.text.trim().is_empty() {
        return Err(Error::line(path, lineno, "empty \"text\""));
    }
    if let Some(l) = raw.label {
        if l > 1 {
            return Err(Error::line(path, lineno, format!("label {l} outside {{0,1}}")));
        }
    }
    Ok(raw)
}

/// Sort key used everywhere notes need chronological order: timestamp
/// ascending (missing timestamps first), ties broken by note_id ascending.
fn chrono_key(n: &Note) -> (Option<DateTime<Utc>>, &str) {
    (n.timestamp, n.note_id.as_str())
}

/// Joins a subject's notes chronologically with a single newline.
pub fn concat_subject_notes(notes: &[Note]) -> Result<String> {
    if notes.is_empty() {
        return Err(Error::Invalid("cannot concatenate an empty note list".into()));
    }
    let subject = &notes[0].subject_id;
    if notes.iter().any(|n| &n.subject_id != subject) {
        return Err(Error::Invalid(format!(
            "notes span multiple subjects (expected {subject})"
        )));
    }
    let mut ordered: Vec<&Note> = notes.iter().collect();
    ordered.sort_by(|a, b| chrono_key(a).cmp(&chrono_key(b)));
    Ok(ordered
        .iter()
        .map(|n| n.text.as_str())
        .collect::<Vec<_>>()
        .join("\n"))
}

/// Builds an instance from a subject's notes inside an optional window.
pub fn instance_from_notes(
    notes: &[Note],
    instance_id: impl Into<String>,
    label: u8,
    window_days: Option<u32>,
) -> Result<Instance> {
    if label > 1 {
        return Err(Error::Invalid(format!("label {label} outside {{0,1}}")));
    }
    let text = concat_subject_notes(notes)?;
    Ok(Instance {
        instance_id: instance_id.into(),
        subject_id: notes[0].subject_id.clone(),
        text,
        label,
        window_days,
    })
}

/// Notes with `anchor - window_days <= timestamp < anchor`, chronological.
///
/// The window is half-open on the right so notes written at or after the
/// event itself are excluded. Notes without a timestamp never match.
pub fn sample_event_window(
    notes: &[Note],
    anchor: DateTime<Utc>,
    window_days: u32,
) -> Result<Vec<Note>> {
    if window_days == 0 {
        return Err(Error::Invalid("window_days must be positive".into()));
    }
    let start = anchor - Duration::days(i64::from(window_days));
    let mut hits: Vec<&Note> = notes
        .iter()
        .filter(|n| n.timestamp.is_some_and(|ts| start <= ts && ts < anchor))
        .collect();
    hits.sort_by(|a, b| chrono_key(a).cmp(&chrono_key(b)));
    Ok(hits.into_iter().cloned().collect())
}

/// Event-window sampling around a uniformly drawn anchor, for subjects
/// with no adverse event.
///
/// The anchor is drawn uniformly (at one-second resolution) over the
/// subject's note span and then nudged forward by one second so the
/// half-open window still contains the note written exactly at the drawn
/// time; a single-note subject therefore yields exactly that note.
pub fn sample_negative_window(
    notes: &[Note],
    window_days: u32,
    rng_seed: u64,
) -> Result<Vec<Note>> {
    let anchor = negative_anchor(notes, rng_seed)?;
    sample_event_window(notes, anchor, window_days)
}

/// The uniformly drawn (then one-second-nudged) anchor used by
/// [`sample_negative_window`].
pub fn negative_anchor(notes: &[Note], rng_seed: u64) -> Result<DateTime<Utc>> {
    if notes.is_empty() {
        return Err(Error::Invalid("cannot sample from an empty note list".into()));
    }
    let stamps: Vec<DateTime<Utc>> = notes.iter().filter_map(|n| n.timestamp).collect();
    if stamps.is_empty() {
        return Err(Error::Invalid(
            "negative-window sampling needs timestamped notes".into(),
        ));
    }
    let lo = *stamps.iter().min().unwrap();
    let hi = *stamps.iter().max().unwrap();
    let span = (hi - lo).num_seconds();
    let mut rng = stream(rng_seed, "negative-window");
    let offset = rng.random_range(0..=span);
    Ok(lo + Duration::seconds(offset) + Duration::seconds(1))
}
