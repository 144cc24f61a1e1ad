//! Token normalization shared by keyword matching and the mock embedder.

use alloc::string::String;
use alloc::vec::Vec;

/// Words dropped when keywords are derived from free text. Explicit
/// keyword lists are matched as given.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "i", "in", "into", "is", "it",
    "its", "me", "my", "of", "on", "or", "so", "that", "the", "this", "to", "with", "want",
    "would", "like",
];

/// Lowercase `s` and split it on every non-alphanumeric character.
pub fn tokenize(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Distinct non-stopword tokens of `s`, in order of first appearance.
pub fn keywords_from_text(s: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in tokenize(s) {
        if !STOPWORDS.contains(&t.as_str()) && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}
