//! The two tokenizations everything else builds on.
//!
//! Whitespace tokens are the unit of error accounting: a token is a
//! maximal run of non-whitespace characters. Feature tokens are maximal
//! runs of ASCII letters, lowercased, and are what TF-IDF and embedding
//! lookups consume.

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// One whitespace-delimited token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WsToken {
    pub text: String,
    /// 0-based position in the token stream.
    pub index: usize,
    /// True iff the token contains any character outside letters/digits.
    pub has_punct: bool,
}

/// Splits on any Unicode whitespace run; empty strings never appear.
pub fn ws_tokens(text: &str) -> Vec<WsToken> {
    text.split_whitespace()
        .enumerate()
        .map(|(index, t)| WsToken {
            text: t.to_string(),
            index,
            has_punct: t.chars().any(|c| !c.is_alphanumeric()),
        })
        .collect()
}

/// Token count under the whitespace tokenization, without allocating.
pub fn ws_token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Maximal ASCII-letter runs, lowercased, in document order.
///
/// Digits and punctuation split runs and never appear inside a token, so
/// `"at2300hrs"` yields `["at", "hrs"]`.
pub fn feature_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if c.is_ascii_alphabetic() {
            run.push(c.to_ascii_lowercase());
        } else if !run.is_empty() {
            tokens.push(std::mem::take(&mut run));
        }
    }
    if !run.is_empty() {
        tokens.push(run);
    }
    tokens
}

/// Drops tokens present in the stoplist, preserving order.
pub fn stopword_filter(tokens: Vec<String>, stoplist: &HashSet<String>) -> Vec<String> {
    if stoplist.is_empty() {
        return tokens;
    }
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// The stopword list shipped with the crate (standard English list, v1).
pub const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords_en.txt");

/// Parses a stoplist: one token per line, blank lines and `#` comments skipped.
/// Tokens are lowercased on the way in.
pub fn parse_stoplist(contents: &str) -> HashSet<String> {
    contents
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// The pinned default English stoplist.
pub fn default_stoplist() -> HashSet<String> {
    parse_stoplist(DEFAULT_STOPWORDS)
}

/// Loads a stoplist file in the format accepted by [`parse_stoplist`].
pub fn load_stoplist(path: &Path) -> Result<HashSet<String>> {
    let contents = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stoplist(&contents))
}
