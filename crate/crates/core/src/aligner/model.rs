//! Lexical translation model trained by expectation maximization.
//!
//! Every target word is generated either by the NULL word, with fixed prior
//! probability `p_null`, or by one of the source words. The source position
//! prior is uniform (`Model1`) or decays exponentially with the distance from
//! the diagonal (`Model2Diagonal`), with a trainable sharpness `lambda`:
//!
//! ```text
//! a(i | j, m, n) = (1 - p_null) * exp(-lambda * |i/m - j/n|) / Z(j, m, n)
//! ```
//!
//! with 1-based positions `i` and `j`. The E-step is computed over fixed-size
//! chunks of sentence pairs and reduced in chunk order, so results are
//! bit-identical for any number of worker threads.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, DefaultHasher};
use std::io::Write as _;

use serde::{Deserialize, Serialize};

use super::links::{AlignmentLink, AlignmentSet, Direction, DocPair};
use crate::error::{Error, Result};
use crate::ingest::ParallelCorpus;

/// HashMap with a fixed hasher so that iteration order, and therefore every
/// floating-point reduction over it, is reproducible across runs.
type DetMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

pub const NULL_TOKEN: &str = "<null>";
const NULL_ID: u32 = 0;
const CHUNK: usize = 16;
const LAMBDA_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignModel {
    #[default]
    Model1,
    Model2Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub iterations: usize,
    pub model: AlignModel,
    pub p_null: f64,
    pub lambda_init: f64,
    pub optimize_lambda: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            model: AlignModel::Model1,
            p_null: 0.08,
            lambda_init: 4.0,
            optimize_lambda: true,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "iterations must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.p_null) {
            return Err(Error::InvalidArgument(format!(
                "p_null {} outside [0, 1)",
                self.p_null
            )));
        }
        if !(self.lambda_init >= 0.0 && self.lambda_init.is_finite()) {
            return Err(Error::InvalidArgument(
                "lambda must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Vocab {
    ids: HashMap<String, u32>,
    words: Vec<String>,
}

impl Vocab {
    fn with_null() -> Self {
        let mut v = Self::default();
        v.intern(NULL_TOKEN);
        v
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.ids.insert(w.to_owned(), id);
        self.words.push(w.to_owned());
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.ids.get(w).copied()
    }
}

/// Conditional probabilities `t(f | e)` plus the alignment prior parameters.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    source: Vocab,
    target: Vocab,
    rows: Vec<DetMap<u32, f64>>,
    pub model: AlignModel,
    pub p_null: f64,
    pub lambda: f64,
}

/// Result of [`train_em`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub table: TranslationTable,
    /// Corpus log-likelihood before each iteration and after the last one
    /// (`iterations + 1` values).
    pub log_likelihood: Vec<f64>,
}

impl TranslationTable {
    /// `t(f | e)`; `None` for `e` means the NULL word. Unknown words give 0.
    pub fn prob(&self, e: Option<&str>, f: &str) -> f64 {
        let e_id = match e {
            None => Some(NULL_ID),
            Some(w) => self.source.get(w),
        };
        match (e_id, self.target.get(f)) {
            (Some(e), Some(f)) => self.rows[e as usize].get(&f).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Sum of `t(· | e)` for every source word including NULL.
    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(sorted_sum).collect()
    }

    pub fn source_vocab_len(&self) -> usize {
        self.source.words.len() - 1
    }

    /// Builds a table from explicit entries; rows are used as given.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (Option<&'a str>, &'a str, f64)>,
        model: AlignModel,
        p_null: f64,
        lambda: f64,
    ) -> Self {
        let mut table = Self {
            source: Vocab::with_null(),
            target: Vocab::default(),
            rows: vec![DetMap::default()],
            model,
            p_null,
            lambda,
        };
        for (e, f, p) in entries {
            let e_id = e.map_or(NULL_ID, |w| table.source.intern(w));
            if table.rows.len() <= e_id as usize {
                table.rows.resize_with(e_id as usize + 1, DetMap::default);
            }
            let f_id = table.target.intern(f);
            table.rows[e_id as usize].insert(f_id, p);
        }
        table
    }

    /// TSV `e<TAB>f<TAB>prob`, sorted, preceded by a `#` parameter line.
    pub fn to_tsv(&self) -> String {
        let mut entries: Vec<(&str, &str, f64)> = Vec::new();
        for (e, row) in self.rows.iter().enumerate() {
            for (&f, &p) in row {
                entries.push((&self.source.words[e], &self.target.words[f as usize], p));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = Vec::new();
        let model = match self.model {
            AlignModel::Model1 => "model1",
            AlignModel::Model2Diagonal => "model2-diagonal",
        };
        writeln!(
            out,
            "# model={model} p_null={} lambda={}",
            self.p_null, self.lambda
        )
        .unwrap();
        for (e, f, p) in entries {
            writeln!(out, "{e}\t{f}\t{p}").unwrap();
        }
        String::from_utf8(out).expect("utf-8")
    }

    pub fn parse_tsv(input: &str) -> Result<Self> {
        let mut model = AlignModel::Model1;
        let mut p_null = EmConfig::default().p_null;
        let mut lambda = EmConfig::default().lambda_init;
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            if let Some(header) = line.strip_prefix('#') {
                for kv in header.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("model", "model2-diagonal")) => model = AlignModel::Model2Diagonal,
                        Some(("model", _)) => model = AlignModel::Model1,
                        Some(("p_null", v)) => p_null = v.parse().unwrap_or(p_null),
                        Some(("lambda", v)) => lambda = v.parse().unwrap_or(lambda),
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::malformed(n + 1, "expected e<TAB>f<TAB>prob"));
            }
            let p: f64 = cols[2]
                .parse()
                .map_err(|_| Error::malformed(n + 1, format!("bad probability `{}`", cols[2])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::malformed(
                    n + 1,
                    format!("probability {p} outside [0, 1]"),
                ));
            }
            entries.push((cols[0].to_owned(), cols[1].to_owned(), p));
        }
        Ok(Self::from_entries(
            entries.iter().map(|(e, f, p)| {
                let e = (e != NULL_TOKEN).then_some(e.as_str());
                (e, f.as_str(), *p)
            }),
            model,
            p_null,
            lambda,
        ))
    }

    /// Viterbi alignment: each target word links to its most probable
    /// generator, or to nothing when NULL wins. Ties go to the earlier source
    /// word; a source word must beat NULL strictly.
    pub fn align<S: AsRef<str>>(&self, src: &[S], tgt: &[S], docs: DocPair) -> AlignmentSet {
        let src_ids: Vec<Option<u32>> = src.iter().map(|w| self.source.get(w.as_ref())).collect();
        let m = src.len();
        let n = tgt.len();
        let mut links = Vec::new();
        for (j, f) in tgt.iter().enumerate() {
            let Some(f_id) = self.target.get(f.as_ref()) else {
                continue;
            };
            let prior = Prior::new(self.model, self.p_null, self.lambda, m, n, j);
            let null_score = self.p_null
                * self.rows[NULL_ID as usize]
                    .get(&f_id)
                    .copied()
                    .unwrap_or(0.0);
            let mut best: Option<(usize, f64)> = None;
            for (i, e) in src_ids.iter().enumerate() {
                let t = e
                    .and_then(|e| self.rows[e as usize].get(&f_id).copied())
                    .unwrap_or(0.0);
                let score = prior.weight(i) * t;
                if score > best.map_or(0.0, |b| b.1) {
                    best = Some((i, score));
                }
            }
            if let Some((i, score)) = best {
                if score > null_score {
                    links.push(AlignmentLink::new(i, j));
                }
            }
        }
        AlignmentSet::new(docs, Direction::Forward, links)
    }
}

fn sorted_sum(row: &DetMap<u32, f64>) -> f64 {
    let mut vals: Vec<(u32, f64)> = row.iter().map(|(&k, &v)| (k, v)).collect();
    vals.sort_unstable_by_key(|x| x.0);
    vals.iter().map(|x| x.1).sum()
}

/// Closed-form normalizer of the diagonal prior over source positions 1..=m
/// for target position `j` (1-based) of `n`.
fn diagonal_z(lambda: f64, m: usize, n: usize, j: usize) -> f64 {
    let mf = m as f64;
    let jn = j as f64 / n as f64;
    let split = ((j * m) / n).min(m);
    let geometric = |count: usize| -> f64 {
        if count == 0 {
            return 0.0;
        }
        let r = (-lambda / mf).exp();
        if r == 1.0 {
            count as f64
        } else {
            (1.0 - r.powi(count as i32)) / (1.0 - r)
        }
    };
    // i = split, split-1, ..., 1 moving away from the diagonal downwards
    let below = if split >= 1 {
        (-lambda * (jn - split as f64 / mf)).exp() * geometric(split)
    } else {
        0.0
    };
    // i = split+1, ..., m moving away upwards
    let above = if split < m {
        (-lambda * ((split + 1) as f64 / mf - jn)).exp() * geometric(m - split)
    } else {
        0.0
    };
    below + above
}

/// Prior over source positions for one target position.
struct Prior {
    model: AlignModel,
    uniform: f64,
    lambda: f64,
    scale: f64,
    m: f64,
    jn: f64,
}

impl Prior {
    fn new(model: AlignModel, p_null: f64, lambda: f64, m: usize, n: usize, j: usize) -> Self {
        let mass = 1.0 - p_null;
        let (uniform, scale) = match model {
            AlignModel::Model1 => (mass / m as f64, 0.0),
            AlignModel::Model2Diagonal => (0.0, mass / diagonal_z(lambda, m, n, j + 1)),
        };
        Self {
            model,
            uniform,
            lambda,
            scale,
            m: m as f64,
            jn: (j + 1) as f64 / n as f64,
        }
    }

    fn weight(&self, i: usize) -> f64 {
        match self.model {
            AlignModel::Model1 => self.uniform,
            AlignModel::Model2Diagonal => {
                self.scale * (-self.lambda * ((i + 1) as f64 / self.m - self.jn).abs()).exp()
            }
        }
    }
}

struct Encoded {
    src: Vec<u32>,
    tgt: Vec<u32>,
}

/// Sufficient statistics from one chunk of the E-step.
#[derive(Default)]
struct Stats {
    counts: DetMap<(u32, u32), f64>,
    log_likelihood: f64,
    /// Σ posterior · (−|i/m − j/n|) over non-NULL links.
    diag_feature: f64,
    /// Non-NULL posterior mass per (m, n, j).
    position_mass: DetMap<(u32, u32, u32), f64>,
}

fn e_step_chunk(
    pairs: &[Encoded],
    rows: &[DetMap<u32, f64>],
    config: &EmConfig,
    lambda: f64,
) -> Stats {
    let mut stats = Stats::default();
    let mut scores = Vec::new();
    for p in pairs {
        let (m, n) = (p.src.len(), p.tgt.len());
        for (j, &f) in p.tgt.iter().enumerate() {
            let prior = Prior::new(config.model, config.p_null, lambda, m, n, j);
            let null = config.p_null * rows[NULL_ID as usize].get(&f).copied().unwrap_or(0.0);
            scores.clear();
            let mut total = null;
            for (i, &e) in p.src.iter().enumerate() {
                let s = prior.weight(i) * rows[e as usize].get(&f).copied().unwrap_or(0.0);
                scores.push(s);
                total += s;
            }
            if total <= 0.0 {
                continue;
            }
            stats.log_likelihood += total.ln();
            if null > 0.0 {
                *stats.counts.entry((NULL_ID, f)).or_insert(0.0) += null / total;
            }
            let mut mass = 0.0;
            for (i, (&e, &s)) in p.src.iter().zip(&scores).enumerate() {
                if s == 0.0 {
                    continue;
                }
                let post = s / total;
                *stats.counts.entry((e, f)).or_insert(0.0) += post;
                mass += post;
                if config.model == AlignModel::Model2Diagonal {
                    stats.diag_feature -=
                        post * ((i + 1) as f64 / m as f64 - (j + 1) as f64 / n as f64).abs();
                }
            }
            if config.model == AlignModel::Model2Diagonal && config.optimize_lambda {
                *stats
                    .position_mass
                    .entry((m as u32, n as u32, j as u32 + 1))
                    .or_insert(0.0) += mass;
            }
        }
    }
    stats
}

fn e_step(pairs: &[Encoded], rows: &[DetMap<u32, f64>], config: &EmConfig, lambda: f64) -> Stats {
    let chunks: Vec<&[Encoded]> = pairs.chunks(CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<Stats> = {
        use rayon::prelude::*;
        chunks
            .par_iter()
            .map(|c| e_step_chunk(c, rows, config, lambda))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Stats> = chunks
        .iter()
        .map(|c| e_step_chunk(c, rows, config, lambda))
        .collect();

    let mut total = Stats::default();
    for part in parts {
        total.log_likelihood += part.log_likelihood;
        total.diag_feature += part.diag_feature;
        for (k, v) in part.counts {
            *total.counts.entry(k).or_insert(0.0) += v;
        }
        for (k, v) in part.position_mass {
            *total.position_mass.entry(k).or_insert(0.0) += v;
        }
    }
    total
}

/// Expected complete-data log-likelihood of the position prior, up to
/// terms independent of `lambda`.
fn lambda_objective(stats: &Stats, lambda: f64) -> f64 {
    let mut entries: Vec<(&(u32, u32, u32), &f64)> = stats.position_mass.iter().collect();
    entries.sort_unstable_by_key(|e| *e.0);
    let mut q = lambda * stats.diag_feature;
    for (&(m, n, j), &w) in entries {
        q -= w * diagonal_z(lambda, m as usize, n as usize, j as usize).ln();
    }
    q
}

/// Maximizes the concave lambda objective by golden-section search, keeping
/// the current value unless the objective strictly improves.
fn update_lambda(stats: &Stats, current: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, LAMBDA_MAX);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = lambda_objective(stats, c);
    let mut fd = lambda_objective(stats, d);
    for _ in 0..80 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = lambda_objective(stats, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = lambda_objective(stats, d);
        }
    }
    let candidate = (lo + hi) / 2.0;
    if lambda_objective(stats, candidate) > lambda_objective(stats, current) {
        candidate
    } else {
        current
    }
}

fn m_step(stats: &Stats, rows: &mut [DetMap<u32, f64>]) {
    let mut keys: Vec<&(u32, u32)> = stats.counts.keys().collect();
    keys.sort_unstable();
    let mut totals = vec![0.0; rows.len()];
    for k in &keys {
        totals[k.0 as usize] += stats.counts[*k];
    }
    for row in rows.iter_mut() {
        for v in row.values_mut() {
            *v = 0.0;
        }
    }
    for k in keys {
        let total = totals[k.0 as usize];
        if total > 0.0 {
            rows[k.0 as usize].insert(k.1, stats.counts[k] / total);
        }
    }
    // Rows that received no mass keep a uniform distribution.
    for (e, row) in rows.iter_mut().enumerate() {
        if totals[e] == 0.0 && !row.is_empty() {
            let u = 1.0 / row.len() as f64;
            for v in row.values_mut() {
                *v = u;
            }
        }
    }
}

/// Trains `t(f | e)` (and `lambda` for the diagonal model) on `corpus`.
///
/// Tokens are used as given; trim and case-fold them beforehand.
pub fn train_em(corpus: &ParallelCorpus, config: &EmConfig) -> Result<Trained> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut source = Vocab::with_null();
    let mut target = Vocab::default();
    let pairs: Vec<Encoded> = corpus
        .pairs()
        .iter()
        .map(|p| Encoded {
            src: p.source.iter().map(|w| source.intern(w)).collect(),
            tgt: p.target.iter().map(|w| target.intern(w)).collect(),
        })
        .collect();

    // Uniform initialization over co-occurring target words.
    let mut rows: Vec<DetMap<u32, f64>> = vec![DetMap::default(); source.words.len()];
    for p in &pairs {
        for &f in &p.tgt {
            rows[NULL_ID as usize].insert(f, 0.0);
            for &e in &p.src {
                rows[e as usize].insert(f, 0.0);
            }
        }
    }
    for row in &mut rows {
        let u = 1.0 / row.len().max(1) as f64;
        for v in row.values_mut() {
            *v = u;
        }
    }

    let mut lambda = config.lambda_init;
    let mut log_likelihood = Vec::with_capacity(config.iterations + 1);
    for _ in 0..config.iterations {
        let stats = e_step(&pairs, &rows, config, lambda);
        log_likelihood.push(stats.log_likelihood);
        m_step(&stats, &mut rows);
        if config.model == AlignModel::Model2Diagonal && config.optimize_lambda {
            lambda = update_lambda(&stats, lambda);
        }
    }
    let final_stats = e_step(&pairs, &rows, config, lambda);
    log_likelihood.push(final_stats.log_likelihood);

    Ok(Trained {
        table: TranslationTable {
            source,
            target,
            rows,
            model: config.model,
            p_null: config.p_null,
            lambda,
        },
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SentencePair;

    fn corpus(pairs: &[(&str, &str)]) -> ParallelCorpus {
        ParallelCorpus::new(
            pairs
                .iter()
                .map(|(s, t)| SentencePair {
                    source: s.split_whitespace().map(String::from).collect(),
                    target: t.split_whitespace().map(String::from).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    /// Dense Model 1 with a NULL word, written independently of the sparse
    /// implementation: t[e][f] over the full vocabularies.
    fn dense_model1(
        pairs: &[(&str, &str)],
        iterations: usize,
        p_null: f64,
    ) -> (Vec<String>, Vec<String>, Vec<Vec<f64>>) {
        let mut ev: Vec<String> = vec![NULL_TOKEN.to_string()];
        let mut fv: Vec<String> = Vec::new();
        for (s, t) in pairs {
            for w in s.split_whitespace() {
                if !ev.iter().any(|x| x == w) {
                    ev.push(w.to_string());
                }
            }
            for w in t.split_whitespace() {
                if !fv.iter().any(|x| x == w) {
                    fv.push(w.to_string());
                }
            }
        }
        let idx = |v: &[String], w: &str| v.iter().position(|x| x == w).unwrap();
        // uniform over co-occurring words
        let mut t = vec![vec![0.0; fv.len()]; ev.len()];
        for (s, tt) in pairs {
            for f in tt.split_whitespace() {
                t[0][idx(&fv, f)] = 1.0;
                for e in s.split_whitespace() {
                    t[idx(&ev, e)][idx(&fv, f)] = 1.0;
                }
            }
        }
        for row in &mut t {
            let c = row.iter().filter(|&&x| x > 0.0).count() as f64;
            for x in row.iter_mut() {
                if *x > 0.0 {
                    *x = 1.0 / c;
                }
            }
        }
        for _ in 0..iterations {
            let mut counts = vec![vec![0.0; fv.len()]; ev.len()];
            for (s, tt) in pairs {
                let src: Vec<usize> = s.split_whitespace().map(|w| idx(&ev, w)).collect();
                for f in tt.split_whitespace() {
                    let f = idx(&fv, f);
                    let a = (1.0 - p_null) / src.len() as f64;
                    let z: f64 = p_null * t[0][f] + src.iter().map(|&e| a * t[e][f]).sum::<f64>();
                    counts[0][f] += p_null * t[0][f] / z;
                    for &e in &src {
                        counts[e][f] += a * t[e][f] / z;
                    }
                }
            }
            for (e, row) in counts.iter().enumerate() {
                let tot: f64 = row.iter().sum();
                for f in 0..fv.len() {
                    t[e][f] = row[f] / tot;
                }
            }
        }
        (ev, fv, t)
    }

    #[test]
    fn single_pair_is_forced() {
        let trained = train_em(
            &corpus(&[("a", "x")]),
            &EmConfig {
                iterations: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(trained.table.prob(Some("a"), "x"), 1.0);
    }

    #[test]
    fn two_pair_corpus_prefers_x_for_a() {
        let data = [("a b", "x y"), ("a", "x")];
        let cfg = EmConfig {
            iterations: 5,
            ..Default::default()
        };
        let trained = train_em(&corpus(&data), &cfg).unwrap();
        let t = &trained.table;
        assert!(t.prob(Some("a"), "x") > t.prob(Some("a"), "y"));

        let (ev, fv, dense) = dense_model1(&data, 5, cfg.p_null);
        for (e, ew) in ev.iter().enumerate() {
            for (f, fw) in fv.iter().enumerate() {
                let e_opt = (e != 0).then_some(ew.as_str());
                let got = t.prob(e_opt, fw);
                assert!(
                    (got - dense[e][f]).abs() < 1e-12,
                    "t({fw}|{ew}) {got} vs {}",
                    dense[e][f]
                );
            }
        }
    }

    #[test]
    fn rows_normalized_and_likelihood_monotone() {
        let data = [
            ("a b c", "x y z"),
            ("a c", "x z"),
            ("b", "y"),
            ("c a b", "z x y w"),
        ];
        for model in [AlignModel::Model1, AlignModel::Model2Diagonal] {
            let cfg = EmConfig {
                iterations: 10,
                model,
                ..Default::default()
            };
            let trained = train_em(&corpus(&data), &cfg).unwrap();
            for s in trained.table.row_sums() {
                assert!((s - 1.0).abs() < 1e-9);
            }
            for w in trained.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{model:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            train_em(&ParallelCorpus::default(), &EmConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn diagonal_normalizer_matches_direct_sum() {
        for &(lambda, m, n) in &[
            (0.0, 3, 5),
            (4.0, 7, 3),
            (12.5, 10, 10),
            (1.0, 1, 4),
            (30.0, 25, 9),
        ] {
            for j in 1..=n {
                let direct: f64 = (1..=m)
                    .map(|i| (-lambda * (i as f64 / m as f64 - j as f64 / n as f64).abs()).exp())
                    .sum();
                let closed = diagonal_z(lambda, m, n, j);
                assert!(
                    (direct - closed).abs() < 1e-10 * direct,
                    "{lambda} {m} {n} {j}: {direct} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn viterbi_examples() {
        let t = TranslationTable::from_entries(
            [(Some("a"), "x", 1.0), (None, "x", 1.0)],
            AlignModel::Model1,
            0.08,
            4.0,
        );
        let s = t.align(&["a"], &["x"], DocPair::same("d"));
        assert_eq!(
            s.links().collect::<Vec<_>>(),
            vec![AlignmentLink::new(0, 0)]
        );
        // unseen target word
        let s = t.align(&["a"], &["q"], DocPair::same("d"));
        assert!(s.is_empty());

        // 3x3 table: argmax per target column is e2 -> f0, e0 -> f1, e1 -> f2, with a tie on f1
        let entries = [
            (Some("e0"), "f0", 0.1),
            (Some("e0"), "f1", 0.6),
            (Some("e0"), "f2", 0.3),
            (Some("e1"), "f0", 0.2),
            (Some("e1"), "f1", 0.1),
            (Some("e1"), "f2", 0.7),
            (Some("e2"), "f0", 0.3),
            (Some("e2"), "f1", 0.6),
            (Some("e2"), "f2", 0.1),
        ];
        let t = TranslationTable::from_entries(entries, AlignModel::Model1, 0.08, 4.0);
        let s = t.align(&["e0", "e1", "e2"], &["f0", "f1", "f2"], DocPair::same("d"));
        let got: Vec<(usize, usize)> = s.links().map(|l| (l.src, l.tgt)).collect();
        assert_eq!(got, vec![(0, 1), (1, 2), (2, 0)]);
    }

    #[test]
    fn tsv_round_trip() {
        let trained = train_em(
            &corpus(&[("a b", "x y"), ("a", "x")]),
            &EmConfig {
                model: AlignModel::Model2Diagonal,
                ..Default::default()
            },
        )
        .unwrap();
        let text = trained.table.to_tsv();
        let back = TranslationTable::parse_tsv(&text).unwrap();
        assert_eq!(back.model, AlignModel::Model2Diagonal);
        assert_eq!(back.lambda, trained.table.lambda);
        for (e, f) in [(Some("a"), "x"), (Some("b"), "y"), (None, "x")] {
            assert_eq!(back.prob(e, f), trained.table.prob(e, f));
        }
        assert_eq!(back.to_tsv(), text);
    }
}
