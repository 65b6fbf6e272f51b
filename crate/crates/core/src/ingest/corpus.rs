use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::Tokenizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Sentence-aligned token sequences; neither side of a pair is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Result<Self> {
        if let Some(i) = pairs
            .iter()
            .position(|p| p.source.is_empty() || p.target.is_empty())
        {
            return Err(Error::InvalidArgument(format!(
                "pair {i} has an empty side"
            )));
        }
        Ok(Self { pairs })
    }

    /// Builds a corpus from parallel token lists, silently dropping pairs
    /// with an empty side. Returns the corpus and the number dropped.
    pub fn from_lossy(
        pairs: impl IntoIterator<Item = (Vec<String>, Vec<String>)>,
    ) -> (Self, usize) {
        let mut kept = Vec::new();
        let mut dropped = 0;
        for (source, target) in pairs {
            if source.is_empty() || target.is_empty() {
                dropped += 1;
            } else {
                kept.push(SentencePair { source, target });
            }
        }
        (Self { pairs: kept }, dropped)
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, pair: SentencePair) -> Result<()> {
        if pair.source.is_empty() || pair.target.is_empty() {
            return Err(Error::InvalidArgument("pair has an empty side".into()));
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn extend(&mut self, other: ParallelCorpus) {
        self.pairs.extend(other.pairs);
    }

    /// Returns the corpus with source and target swapped.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    source: p.target.clone(),
                    target: p.source.clone(),
                })
                .collect(),
        }
    }

    pub fn map_tokens(&self, f: impl Fn(&str) -> String) -> Self {
        let conv = |side: &[String]| side.iter().map(|t| f(t)).collect();
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| SentencePair {
                    source: conv(&p.source),
                    target: conv(&p.target),
                })
                .collect(),
        }
    }

    pub fn into_pairs(self) -> Vec<SentencePair> {
        self.pairs
    }
}

/// Reads two line-parallel plain-text files.
///
/// Returns the corpus and the number of line pairs skipped because one side
/// was blank.
pub fn read_parallel_corpus(
    source: impl AsRef<Path>,
    target: impl AsRef<Path>,
    tokenizer: &Tokenizer,
) -> Result<(ParallelCorpus, usize)> {
    let (source, target) = (source.as_ref(), target.as_ref());
    let src = std::fs::read_to_string(source).map_err(|e| Error::io(source, e))?;
    let tgt = std::fs::read_to_string(target).map_err(|e| Error::io(target, e))?;
    let src_lines: Vec<&str> = src.lines().collect();
    let tgt_lines: Vec<&str> = tgt.lines().collect();
    if src_lines.len() != tgt_lines.len() {
        return Err(Error::LineCountMismatch {
            source_lines: src_lines.len(),
            target_lines: tgt_lines.len(),
        });
    }
    Ok(ParallelCorpus::from_lossy(
        src_lines
            .iter()
            .zip(&tgt_lines)
            .map(|(s, t)| (tokenizer.tokenize(s), tokenizer.tokenize(t))),
    ))
}

/// Writes one space-joined sentence per line.
pub fn write_side(pairs: &[SentencePair], source_side: bool) -> String {
    let mut out = String::new();
    for p in pairs {
        let side = if source_side { &p.source } else { &p.target };
        out.push_str(&side.join(" "));
        out.push('\n');
    }
    out
}
