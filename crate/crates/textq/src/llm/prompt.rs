//! Prompt builders for error detection and whole-note correction.
//!
//! The base queries are fixed byte-for-byte; only the token list or the
//! quoted note text varies per instance, so identical input always yields
//! an identical prompt.

/// Base query for token-level error detection. The bracketed, quoted
/// token list of the instance is appended.
pub const DETECTION_BASE: &str = "do any tokens in the following list have a spelling \
mistake, missing space or punctuation errors? generate a table with two columns, the first \
column represents only the tokens containing errors and the other column represents the \
corrected token: ";

/// Base query for whole-note correction. The note text is appended in
/// double quotes.
pub const CORRECTION_BASE: &str = "Strictly proofread and correct any spelling mistakes in \
the following sentences. Only produce a single corrected text and do not provide any \
explanation. Return 'nil' if there is no mistake: ";

/// Renders the detection prompt for a whitespace-token list.
///
/// Tokens are single-quoted with backslash escaping, joined by ", " and
/// bracketed, e.g. `['The', 'resident', 'didnot']`.
pub fn build_detection_prompt<S: AsRef<str>>(tokens: &[S]) -> String {
    let list = tokens
        .iter()
        .map(|t| format!("'{}'", t.as_ref().replace('\\', "\\\\").replace('\'', "\\'")))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{DETECTION_BASE}[{list}]")
}

/// Renders the correction prompt for one note.
///
/// The text is wrapped in double quotes; backslashes, double quotes and
/// line breaks are escaped so the prompt stays on a single line.
pub fn build_correction_prompt(text: &str) -> String {
    let escaped = text
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
        .replace('\r', "\\r");
    format!("{CORRECTION_BASE}\"{escaped}\"")
}
