//! Selection of training pairs whose target is short relative to the source,
//! measured in BPE subword units.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ParallelCorpus, SentencePair};

/// Default maximum target/source subword ratio.
pub const DEFAULT_MAX_RATIO: f64 = 0.86;

/// Ordered BPE merges. Earlier merges have higher priority.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BpeModel {
    merges: HashMap<(String, String), usize>,
    /// Marker appended to the last symbol of a word before merging, as in
    /// merge files that contain pairs like `t </w>`.
    pub end_of_word: Option<String>,
}

impl BpeModel {
    pub fn new<A: Into<String>, B: Into<String>>(
        merges: impl IntoIterator<Item = (A, B)>,
        end_of_word: Option<String>,
    ) -> Self {
        let mut map = HashMap::new();
        for (rank, (a, b)) in merges.into_iter().enumerate() {
            map.entry((a.into(), b.into())).or_insert(rank);
        }
        Self {
            merges: map,
            end_of_word,
        }
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }

    /// One `left right` pair per line; `#` lines are skipped. The end-of-word
    /// marker `</w>` is enabled when any merge mentions it.
    pub fn parse(input: &str) -> Result<Self> {
        let mut merges = Vec::new();
        for (n, line) in input.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) => merges.push((a.to_owned(), b.to_owned())),
                _ => return Err(Error::malformed(n + 1, "expected `left right`")),
            }
        }
        let eow = merges
            .iter()
            .any(|(a, b)| a.ends_with("</w>") || b.ends_with("</w>"))
            .then(|| "</w>".to_owned());
        Ok(Self::new(merges, eow))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Segments one word. Repeatedly merges every occurrence of the
    /// highest-priority adjacent pair until none applies.
    pub fn apply(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        if symbols.is_empty() {
            return symbols;
        }
        if let Some(eow) = &self.end_of_word {
            symbols.last_mut().expect("nonempty").push_str(eow);
        }
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.merges.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len()
                    && self
                        .merges
                        .get(&(symbols[i].clone(), symbols[i + 1].clone()))
                        == Some(&rank)
                {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(symbols[i].clone());
                    i += 1;
                }
            }
            symbols = merged;
        }
        if let Some(eow) = &self.end_of_word {
            let last = symbols.last_mut().expect("nonempty");
            last.truncate(last.len() - eow.len());
            if last.is_empty() {
                symbols.pop();
            }
        }
        symbols
    }

    pub fn count_units<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        tokens.iter().map(|t| self.apply(t.as_ref()).len()).sum()
    }
}

/// Source- and target-side BPE models; the same model may serve both.
#[derive(Debug, Clone)]
pub struct SubwordModels {
    pub source: BpeModel,
    pub target: BpeModel,
}

impl SubwordModels {
    pub fn joint(model: BpeModel) -> Self {
        Self {
            source: model.clone(),
            target: model,
        }
    }
}

/// `|target subwords| / |source subwords|`.
pub fn subword_ratio<S: AsRef<str>>(src: &[S], tgt: &[S], models: &SubwordModels) -> Result<f64> {
    let s = models.source.count_units(src);
    if s == 0 {
        return Err(Error::ZeroSource);
    }
    Ok(models.target.count_units(tgt) as f64 / s as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Keep pairs with ratio `<=` this value.
    pub max_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_ratio: DEFAULT_MAX_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub max_ratio: f64,
    pub kept: usize,
    pub dropped: usize,
    pub mean_kept_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub source_merges: usize,
    pub target_merges: usize,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: ParallelCorpus,
    pub stats: FilterStats,
}

/// Retains, in order, exactly the pairs whose subword ratio is at most
/// `config.max_ratio`.
pub fn filter_corpus(
    corpus: &ParallelCorpus,
    config: &FilterConfig,
    models: &SubwordModels,
) -> Result<FilterOutcome> {
    if config.max_ratio.is_nan() || config.max_ratio <= 0.0 {
        return Err(Error::InvalidArgument(
            "ratio threshold must be positive".into(),
        ));
    }
    let ratios: Vec<Option<f64>> = corpus
        .pairs()
        .iter()
        .map(|p| subword_ratio(&p.source, &p.target, models).ok())
        .collect();
    let mut kept = Vec::new();
    let mut kept_ratios = Vec::new();
    for (pair, ratio) in corpus.pairs().iter().zip(&ratios) {
        if let Some(r) = ratio.filter(|r| *r <= config.max_ratio) {
            kept.push(SentencePair::clone(pair));
            kept_ratios.push(r);
        }
    }
    let all: Vec<f64> = ratios.iter().flatten().copied().collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let stats = FilterStats {
        max_ratio: config.max_ratio,
        kept: kept.len(),
        dropped: corpus.len() - kept.len(),
        mean_kept_ratio: mean(&kept_ratios),
        mean_ratio: mean(&all),
        source_merges: models.source.len(),
        target_merges: models.target.len(),
    };
    Ok(FilterOutcome {
        kept: ParallelCorpus::new(kept)?,
        stats,
    })
}
