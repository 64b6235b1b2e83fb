//! Parsers for detection and correction responses.
//!
//! Detection answers arrive as an HTML table or a pipe-delimited markdown
//! table of (erroneous token, corrected token) rows. Correction answers
//! are the rewritten note, usually quoted, sometimes suffixed with an
//! annotation like `(Corrected)`, or the literal `nil` when the note had
//! no mistake. Model output is unreliable, so a missing table degrades to
//! an empty result with a warning flag rather than a hard error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parsed (erroneous token, corrected token) pairs from one response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub pairs: Vec<(String, String)>,
    /// Rows where the "corrected" token equals the input token; these are
    /// dropped from `pairs` and counted here.
    pub identity_dropped: usize,
    /// True when no table could be found in the response.
    pub parse_warning: bool,
    pub raw_response: String,
}

/// Outcome of a correction call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Correction {
    Corrected(String),
    /// The service answered `nil`: the note had no mistake.
    Unchanged,
}

/// Extracts detection pairs from an HTML or markdown table.
///
/// Header rows are dropped, cells are whitespace-trimmed, rows with an
/// empty first cell are ignored, and identity rows are counted separately.
pub fn parse_detection_response(raw: &str) -> DetectionResult {
    let mut rows = parse_html_rows(raw);
    if rows.is_empty() {
        rows = parse_markdown_rows(raw);
    }
    let found_table = !rows.is_empty() || find_ci(raw, "<table", 0).is_some();
    let mut pairs = Vec::new();
    let mut identity_dropped = 0usize;
    for (err, corr) in rows {
        if err.is_empty() {
            continue;
        }
        if err == corr {
            identity_dropped += 1;
            continue;
        }
        pairs.push((err, corr));
    }
    DetectionResult {
        pairs,
        identity_dropped,
        parse_warning: !found_table,
        raw_response: raw.to_string(),
    }
}

/// Case-insensitive ASCII substring search.
fn find_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let h = haystack.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || from + n.len() > h.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| {
        h[i..i + n.len()]
            .iter()
            .zip(n)
            .all(|(a, b)| a.eq_ignore_ascii_case(b))
    })
}

/// Contents of every `<tag ...>...</tag>` block, in order.
fn tag_blocks<'a>(s: &'a str, tag: &str) -> Vec<&'a str> {
    let open = format!("<{tag}");
    let close = format!("</{tag}>");
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(start) = find_ci(s, &open, pos) {
        let Some(gt) = s[start..].find('>') else { break };
        let body_start = start + gt + 1;
        let Some(end) = find_ci(s, &close, body_start) else { break };
        out.push(&s[body_start..end]);
        pos = end + close.len();
    }
    out
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' => in_tag = false,
            c if !in_tag => out.push(c),
            _ => {}
        }
    }
    unescape_entities(out.trim())
}

fn unescape_entities(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

fn parse_html_rows(raw: &str) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for table in tag_blocks(raw, "table") {
        for tr in tag_blocks(table, "tr") {
            // header rows use <th>
            let cells = tag_blocks(tr, "td");
            if cells.len() >= 2 {
                rows.push((strip_tags(cells[0]), strip_tags(cells[1])));
            }
        }
    }
    rows
}

fn parse_markdown_rows(raw: &str) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for line in raw.lines() {
        let line = line.trim();
        if !line.contains('|') {
            continue;
        }
        let mut cells: Vec<&str> = line.split('|').map(str::trim).collect();
        if cells.first() == Some(&"") {
            cells.remove(0);
        }
        if cells.last() == Some(&"") {
            cells.pop();
        }
        if cells.len() < 2 {
            continue;
        }
        let is_separator = cells
            .iter()
            .all(|c| !c.is_empty() && c.chars().all(|ch| ch == '-' || ch == ':'));
        if is_separator {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        rows.push((cells[0].to_string(), cells[1].to_string()));
    }
    rows
}

/// Recovers the corrected text from a correction response.
///
/// Strips a trailing annotation like `(Corrected)` when it sits outside
/// the quoted payload, then one symmetric layer of quotes. A response of
/// `nil` (any case, optionally quoted) means the note was already clean.
/// An empty response is an error.
pub fn parse_correction_response(raw: &str) -> Result<Correction> {
    let mut text = raw.trim();
    if text.is_empty() {
        return Err(Error::Invalid("empty correction response".into()));
    }
    text = strip_trailing_annotation(text);
    let text = strip_symmetric_quotes(text);
    if text.is_empty() {
        return Err(Error::Invalid("correction response had no payload".into()));
    }
    if text.eq_ignore_ascii_case("nil") || text.eq_ignore_ascii_case("nil.") {
        return Ok(Correction::Unchanged);
    }
    Ok(Correction::Corrected(text.to_string()))
}

/// Drops a trailing `(...)` annotation when it follows the closing quote
/// of the payload, or when it is literally `(corrected)`.
fn strip_trailing_annotation(text: &str) -> &str {
    let trimmed = text.trim_end();
    if !trimmed.ends_with(')') {
        return text;
    }
    let Some(open) = trimmed.rfind('(') else { return text };
    let before = trimmed[..open].trim_end();
    let inside = &trimmed[open + 1..trimmed.len() - 1];
    let is_annotation = before.ends_with('"') || before.ends_with('\'');
    if is_annotation || inside.eq_ignore_ascii_case("corrected") {
        return before;
    }
    text
}

fn strip_symmetric_quotes(text: &str) -> &str {
    let t = text.trim();
    for q in ['"', '\''] {
        if t.len() >= 2 && t.starts_with(q) && t.ends_with(q) {
            return &t[1..t.len() - 1];
        }
    }
    t
}
