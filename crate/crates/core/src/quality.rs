//! Corpus BLEU in two segmentation modes and aggregation of human
//! information-preservation scores.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmetrics::mean_std;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segmentation {
    /// The whole test set is one segment.
    #[default]
    Agg,
    /// Each document is one segment; n-gram counts are summed over segments.
    One,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    /// Any zero precision makes the score zero.
    #[default]
    None,
    /// Add one to matches and totals for orders above one.
    AddOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuConfig {
    pub max_order: usize,
    pub lowercase: bool,
    pub smoothing: Smoothing,
    pub mode: Segmentation,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            lowercase: false,
            smoothing: Smoothing::None,
            mode: Segmentation::Agg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// In `[0, 100]`.
    pub score: f64,
    pub precisions: Vec<f64>,
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub config: BleuConfig,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Adds one segment's clipped matches and hypothesis n-gram totals.
fn accumulate(hyp: &[String], reference: &[String], matches: &mut [usize], totals: &mut [usize]) {
    for n in 1..=matches.len() {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        for (gram, &c) in &h {
            matches[n - 1] += c.min(r.get(gram).copied().unwrap_or(0));
        }
        totals[n - 1] += hyp.len().saturating_sub(n - 1);
    }
}

/// Corpus BLEU over tokenized segments.
///
/// Orders for which the hypothesis has no n-grams at all (it is shorter than
/// `n`) are left out of the geometric mean.
pub fn bleu(
    hypotheses: &[Vec<String>],
    references: &[Vec<String>],
    config: &BleuConfig,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if config.max_order == 0 {
        return Err(Error::InvalidArgument(
            "BLEU order must be at least 1".into(),
        ));
    }
    let fold = |segs: &[Vec<String>]| -> Vec<Vec<String>> {
        segs.iter()
            .map(|s| {
                if config.lowercase {
                    s.iter().map(|t| t.to_lowercase()).collect()
                } else {
                    s.clone()
                }
            })
            .collect()
    };
    let (mut hyps, mut refs) = (fold(hypotheses), fold(references));
    if config.mode == Segmentation::Agg {
        hyps = vec![hyps.concat()];
        refs = vec![refs.concat()];
    }
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if ref_len == 0 {
        return Err(Error::EmptyReference);
    }
    let order = config.max_order;
    let mut matches = vec![0; order];
    let mut totals = vec![0; order];
    for (h, r) in hyps.iter().zip(&refs) {
        accumulate(h, r, &mut matches, &mut totals);
    }

    let mut precisions = Vec::with_capacity(order);
    let mut log_sum = 0.0;
    let mut used = 0usize;
    let mut zero = hyp_len == 0;
    for n in 0..order {
        if totals[n] == 0 {
            precisions.push(0.0);
            continue;
        }
        let p = match config.smoothing {
            Smoothing::AddOne if n > 0 => (matches[n] + 1) as f64 / (totals[n] + 1) as f64,
            _ => matches[n] as f64 / totals[n] as f64,
        };
        precisions.push(p);
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        used += 1;
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let score = if zero || used == 0 {
        0.0
    } else {
        brevity_penalty * (log_sum / used as f64).exp() * 100.0
    };
    Ok(BleuReport {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
        config: *config,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sentence_id: String,
    pub system: String,
    pub annotator: String,
    /// On the 0–100 scale.
    pub score: f64,
}

pub fn parse_annotations(input: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::malformed(
                n + 1,
                "expected sentence_id<TAB>system<TAB>annotator<TAB>score",
            ));
        }
        let score: f64 = cols[3]
            .trim()
            .parse()
            .map_err(|_| Error::malformed(n + 1, format!("bad score `{}`", cols[3])))?;
        if !(0.0..=100.0).contains(&score) {
            return Err(Error::malformed(
                n + 1,
                format!("score {score} outside 0..100"),
            ));
        }
        out.push(AnnotationRecord {
            sentence_id: cols[0].to_owned(),
            system: cols[1].to_owned(),
            annotator: cols[2].to_owned(),
            score,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub annotator: String,
    pub system: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

/// Mean and population std of scores rescaled to `[0, 1]`, per
/// (annotator, system), sorted by annotator then system.
pub fn aggregate_annotations(records: &[AnnotationRecord]) -> Result<Vec<AnnotationSummary>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut groups: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in records {
        if !(0.0..=100.0).contains(&r.score) {
            return Err(Error::InvalidArgument(format!(
                "score {} outside 0..100",
                r.score
            )));
        }
        groups
            .entry((r.annotator.as_str(), r.system.as_str()))
            .or_default()
            .push(r.score / 100.0);
    }
    Ok(groups
        .into_iter()
        .map(|((annotator, system), scores)| {
            let s = mean_std(&scores).expect("nonempty group");
            AnnotationSummary {
                annotator: annotator.to_owned(),
                system: system.to_owned(),
                n: scores.len(),
                mean: s.mean,
                std: s.std,
            }
        })
        .collect())
}
