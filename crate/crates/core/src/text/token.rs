//! Tokenization and sentence splitting.

use serde::{Deserialize, Serialize};

/// A document reduced to its lowercase token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn new(doc_id: impl Into<String>, text: &str) -> Self {
        Self {
            doc_id: doc_id.into(),
            tokens: tokenize(text),
        }
    }

    pub fn from_tokens(doc_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            tokens,
        }
    }
}

/// Lowercase and split on Unicode whitespace, stripping leading/trailing
/// punctuation from each token. Runs of punctuation with no alphanumeric
/// content are dropped entirely, so `"Help?"` tokenizes to `["help"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lowered = raw.to_lowercase();
            let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_string())
            }
        })
        .collect()
}

/// Split text into sentences at `.`, `!` or `?` followed by whitespace or end
/// of input. The terminator stays with its sentence; only the whitespace
/// between sentences is dropped. Text without terminators comes back as a
/// single sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            match chars.peek() {
                None => {}
                Some(next) if next.is_whitespace() => {
                    let sentence = current.trim();
                    if !sentence.is_empty() {
                        sentences.push(sentence.to_string());
                    }
                    current.clear();
                }
                Some(_) => {}
            }
        }
    }
    let sentence = current.trim();
    if !sentence.is_empty() {
        sentences.push(sentence.to_string());
    }
    sentences
}
