//! Rule-based tokenization shared by alignment, finalization and scoring.
//!
//! The rule set is deliberately small and fully deterministic:
//!
//! 1. Input is NFC-normalized and split on Unicode whitespace.
//! 2. Inside each chunk, runs of alphanumeric characters form word tokens.
//! 3. An apostrophe or hyphen stays inside a word when it sits between two
//!    alphanumeric characters (`don't`, `co-operation`).
//! 4. A period or comma stays inside a number when it sits between two digits
//!    (`3.5`, `1,000`).
//! 5. Every other character becomes a token of its own.
//!
//! Lowercasing is applied only when requested.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Configuration for [`Tokenizer::tokenize`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    #[serde(default)]
    pub lowercase: bool,
}

impl Tokenizer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lowercasing() -> Self {
        Self { lowercase: true }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let normalized: String = text.nfc().collect();
        let mut out = Vec::new();
        for chunk in normalized.split_whitespace() {
            split_chunk(chunk, &mut out);
        }
        if self.lowercase {
            for tok in &mut out {
                *tok = tok.to_lowercase();
            }
        }
        out
    }

    /// Short human-readable description recorded in reports.
    pub fn describe(&self) -> String {
        format!(
            "rule-based punctuation split (nfc, lowercase={})",
            self.lowercase
        )
    }
}

/// Tokenizes with the default (case-preserving) configuration.
pub fn tokenize(text: &str) -> Vec<String> {
    Tokenizer::new().tokenize(text)
}

fn is_word_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}')
}

fn is_number_joiner(c: char) -> bool {
    matches!(c, '.' | ',')
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        let prev = i.checked_sub(1).map(|p| chars[p]);
        let next = chars.get(i + 1).copied();
        let keep = match (prev, next) {
            (Some(p), Some(n)) if !word.is_empty() => {
                (is_word_joiner(c) && p.is_alphanumeric() && n.is_alphanumeric())
                    || (is_number_joiner(c) && p.is_numeric() && n.is_numeric())
            }
            _ => false,
        };
        if keep {
            word.push(c);
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

/// Keeps the first `k` characters of `token` (a crude lemmatizer).
///
/// Counts Unicode scalar values, never bytes.
pub fn trim_lemma(token: &str, k: usize) -> String {
    assert!(k >= 1, "trim length must be at least 1");
    token.chars().take(k).collect()
}

/// Removes every token that equals one of `symbols`, preserving order.
pub fn strip_symbols<S: AsRef<str>>(tokens: &[S], symbols: &HashSet<String>) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !symbols.contains(*t))
        .map(str::to_owned)
        .collect()
}

/// The comma and full stop, the default symbols removed before vocabulary statistics.
pub fn default_symbols() -> HashSet<String> {
    [",", "."].iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("Hello, world."), v(&["Hello", ",", "world", "."]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a b"), v(&["a", "b"]));
    }

    #[test]
    fn keeps_inner_joiners() {
        assert_eq!(tokenize("don't"), v(&["don't"]));
        assert_eq!(tokenize("co-operation"), v(&["co-operation"]));
        assert_eq!(tokenize("3.5 1,000"), v(&["3.5", "1,000"]));
        assert_eq!(tokenize("end-"), v(&["end", "-"]));
        assert_eq!(tokenize("'quoted'"), v(&["'", "quoted", "'"]));
        assert_eq!(tokenize("now..."), v(&["now", ".", ".", "."]));
        assert_eq!(tokenize("a.b"), v(&["a", ".", "b"]));
    }

    #[test]
    fn lowercase_only_on_request() {
        assert_eq!(tokenize("Žluť"), v(&["Žluť"]));
        assert_eq!(Tokenizer::lowercasing().tokenize("Žluť"), v(&["žluť"]));
    }

    #[test]
    fn nfc_normalizes() {
        // "e" + combining acute accent
        assert_eq!(tokenize("cafe\u{301}"), v(&["café"]));
    }

    #[test]
    fn trims_characters_not_bytes() {
        assert_eq!(trim_lemma("parliament", 5), "parli");
        assert_eq!(trim_lemma("ab", 5), "ab");
        assert_eq!(trim_lemma("žlutý", 3), "žlu");
    }

    #[test]
    fn strips_symbols() {
        let syms = default_symbols();
        assert_eq!(
            strip_symbols(&v(&["a", ",", "b", "."]), &syms),
            v(&["a", "b"])
        );
        assert!(strip_symbols::<String>(&[], &syms).is_empty());
        assert_eq!(strip_symbols(&v(&["x", "y"]), &syms), v(&["x", "y"]));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "[a-zA-Zčř0-9 ,.'!?-]{0,40}") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn trim_is_idempotent(tok in "\\PC{0,12}", k in 1usize..8) {
            let t = trim_lemma(&tok, k);
            prop_assert_eq!(trim_lemma(&t, k), t);
        }
    }
}
