//! Length compression and vocabulary complexity of translations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::strip_symbols;

/// Rule-based syllable estimate: one syllable per maximal vowel cluster.
///
/// For Czech, `r` and `l` also form a nucleus when they follow a consonant
/// and are not followed by a vowel (`vlk`, `Brno`, `nesl`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyllableRule {
    pub language: String,
    vowels: Vec<char>,
    syllabic_consonants: Vec<char>,
}

impl SyllableRule {
    pub fn english() -> Self {
        Self::new("en", "aeiouy", "")
    }

    pub fn czech() -> Self {
        Self::new("cs", "aáeéěiíoóuúůyý", "rl")
    }

    pub fn german() -> Self {
        Self::new("de", "aeiouyäöü", "")
    }

    pub fn new(language: &str, vowels: &str, syllabic_consonants: &str) -> Self {
        Self {
            language: language.to_owned(),
            vowels: vowels.chars().collect(),
            syllabic_consonants: syllabic_consonants.chars().collect(),
        }
    }

    /// Rule for a language tag (`en`, `cs`, `de`, optionally with a region).
    pub fn for_language(tag: &str) -> Result<Self> {
        let primary = tag
            .split(['-', '_'])
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        match primary.as_str() {
            "en" => Ok(Self::english()),
            "cs" | "cz" => Ok(Self::czech()),
            "de" => Ok(Self::german()),
            _ => Err(Error::InvalidArgument(format!(
                "no syllable rule for `{tag}`"
            ))),
        }
    }

    fn is_vowel(&self, c: char) -> bool {
        self.vowels.contains(&c)
    }

    pub fn count(&self, word: &str) -> usize {
        let chars: Vec<char> = word.to_lowercase().chars().collect();
        let mut count = 0;
        let mut in_cluster = false;
        for (i, &c) in chars.iter().enumerate() {
            let nucleus = self.is_vowel(c) || self.is_syllabic_consonant(&chars, i);
            if nucleus && !in_cluster {
                count += 1;
            }
            in_cluster = self.is_vowel(c) && nucleus;
        }
        count
    }

    fn is_syllabic_consonant(&self, chars: &[char], i: usize) -> bool {
        if !self.syllabic_consonants.contains(&chars[i]) || i == 0 {
            return false;
        }
        let prev = chars[i - 1];
        let prev_consonant = prev.is_alphabetic() && !self.is_vowel(prev);
        let next_vowel = chars.get(i + 1).is_some_and(|&n| self.is_vowel(n));
        prev_consonant && !next_vowel
    }
}

pub fn count_syllables(word: &str, rule: &SyllableRule) -> usize {
    rule.count(word)
}

/// Non-whitespace characters.
pub fn count_chars<S: AsRef<str>>(tokens: &[S]) -> usize {
    tokens
        .iter()
        .map(|t| t.as_ref().chars().filter(|c| !c.is_whitespace()).count())
        .sum()
}

pub fn count_text_syllables<S: AsRef<str>>(tokens: &[S], rule: &SyllableRule) -> usize {
    tokens.iter().map(|t| rule.count(t.as_ref())).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionRatio {
    pub syllables: f64,
    pub characters: f64,
}

/// Target-to-source ratio of syllable and character totals.
pub fn compression<S: AsRef<str>>(
    src: &[S],
    src_rule: &SyllableRule,
    tgt: &[S],
    tgt_rule: &SyllableRule,
) -> Result<CompressionRatio> {
    let src_syl = count_text_syllables(src, src_rule);
    let src_chars = count_chars(src);
    if src_syl == 0 || src_chars == 0 {
        return Err(Error::ZeroSource);
    }
    Ok(CompressionRatio {
        syllables: count_text_syllables(tgt, tgt_rule) as f64 / src_syl as f64,
        characters: count_chars(tgt) as f64 / src_chars as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentCompression {
    pub doc_id: String,
    pub ratio: CompressionRatio,
}

/// Per-document ratios averaged over documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub documents: Vec<DocumentCompression>,
    pub syllables: Option<MeanStd>,
    pub characters: Option<MeanStd>,
}

impl CompressionReport {
    pub fn from_documents(documents: Vec<DocumentCompression>) -> Self {
        let syl: Vec<f64> = documents.iter().map(|d| d.ratio.syllables).collect();
        let chr: Vec<f64> = documents.iter().map(|d| d.ratio.characters).collect();
        Self {
            syllables: mean_std(&syl),
            characters: mean_std(&chr),
            documents,
        }
    }
}

/// Word → frequency rank, 1 for the most frequent word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTable {
    ranks: HashMap<String, usize>,
}

impl RankTable {
    pub fn rank(&self, word: &str) -> Option<usize> {
        self.ranks.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Words in rank order.
    pub fn words(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.ranks.iter().map(|(w, &r)| (w.as_str(), r)).collect();
        v.sort_by_key(|x| x.1);
        v.into_iter().map(|x| x.0).collect()
    }

    /// TSV `word<TAB>rank` in rank order.
    pub fn to_tsv(&self) -> String {
        self.words()
            .into_iter()
            .enumerate()
            .map(|(i, w)| format!("{w}\t{}\n", i + 1))
            .collect()
    }

    pub fn parse_tsv(input: &str) -> Result<Self> {
        let mut ranks = HashMap::new();
        for (n, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (w, r) = line
                .split_once('\t')
                .ok_or_else(|| Error::malformed(n + 1, "expected word<TAB>rank"))?;
            let r: usize = r
                .trim()
                .parse()
                .map_err(|_| Error::malformed(n + 1, format!("bad rank `{r}`")))?;
            if ranks.insert(w.to_owned(), r).is_some() {
                return Err(Error::malformed(n + 1, format!("duplicate word `{w}`")));
            }
        }
        let mut seen: Vec<usize> = ranks.values().copied().collect();
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(i, &r)| r != i + 1) {
            return Err(Error::InvalidArgument(
                "ranks are not a permutation of 1..V".into(),
            ));
        }
        Ok(Self { ranks })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }
}

/// Ranks words by descending frequency after removing `symbols`; ties are
/// broken lexicographically.
pub fn build_rank_table<S: AsRef<str>>(
    tokens: &[S],
    symbols: &HashSet<String>,
) -> Result<RankTable> {
    let tokens = strip_symbols(tokens, symbols);
    if tokens.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for t in tokens {
        *freq.entry(t).or_insert(0) += 1;
    }
    let mut entries: Vec<(String, usize)> = freq.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(RankTable {
        ranks: entries
            .into_iter()
            .enumerate()
            .map(|(i, (w, _))| (w, i + 1))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    /// Leave unknown words out of the mean and standard deviation.
    #[default]
    Exclude,
    /// Give unknown words rank V + 1.
    RankPastEnd,
}

impl std::str::FromStr for OovPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(OovPolicy::Exclude),
            "rank-past-end" => Ok(OovPolicy::RankPastEnd),
            other => Err(Error::InvalidArgument(format!(
                "unknown OOV policy `{other}`"
            ))),
        }
    }
}

/// Written as `e`, `2` or `10`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LogBase {
    #[default]
    E,
    Two,
    Ten,
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LogBase::E => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        })
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "e" | "ln" => Ok(LogBase::E),
            "2" => Ok(LogBase::Two),
            "10" => Ok(LogBase::Ten),
            other => Err(Error::InvalidArgument(format!(
                "log base `{other}` is not e, 2 or 10"
            ))),
        }
    }
}

impl Serialize for LogBase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LogBase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(i64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Number(n) => n.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// `None` when every token is out of vocabulary.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Tokens entering the mean.
    pub sample_size: usize,
    pub tokens: usize,
    pub oov: usize,
    pub oov_proportion: f64,
    pub log_base: LogBase,
    pub oov_policy: OovPolicy,
}

/// Mean and standard deviation of log frequency ranks of `tokens`.
pub fn log_rank_stats<S: AsRef<str>>(
    tokens: &[S],
    table: &RankTable,
    symbols: &HashSet<String>,
    base: LogBase,
    policy: OovPolicy,
) -> Result<ComplexityReport> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("rank table is empty".into()));
    }
    let tokens = strip_symbols(tokens, symbols);
    let mut logs = Vec::with_capacity(tokens.len());
    let mut oov = 0;
    for t in &tokens {
        match (table.rank(t), policy) {
            (Some(r), _) => logs.push(base.log(r as f64)),
            (None, OovPolicy::Exclude) => oov += 1,
            (None, OovPolicy::RankPastEnd) => {
                oov += 1;
                logs.push(base.log((table.len() + 1) as f64));
            }
        }
    }
    let stats = mean_std(&logs);
    Ok(ComplexityReport {
        mean: stats.map(|s| s.mean),
        std: stats.map(|s| s.std),
        sample_size: logs.len(),
        tokens: tokens.len(),
        oov,
        oov_proportion: if tokens.is_empty() {
            0.0
        } else {
            oov as f64 / tokens.len() as f64
        },
        log_base: base,
        oov_policy: policy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SampleSummary {
    pub fn new(mean: f64, std: f64, n: usize) -> Self {
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    /// Two-sided p-value, clamped away from zero.
    pub p: f64,
}

/// Two-sample Z-test for equal means.
pub fn two_sample_z(a: SampleSummary, b: SampleSummary) -> Result<ZTestResult> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::InvalidArgument("each sample needs n >= 2".into()));
    }
    if !(a.std >= 0.0 && b.std >= 0.0) {
        return Err(Error::InvalidArgument(
            "standard deviation must be >= 0".into(),
        ));
    }
    let se = (a.std * a.std / a.n as f64 + b.std * b.std / b.n as f64).sqrt();
    let diff = a.mean - b.mean;
    if se == 0.0 {
        return if diff == 0.0 {
            Ok(ZTestResult { z: 0.0, p: 1.0 })
        } else {
            Err(Error::DegenerateVariance)
        };
    }
    let z = diff / se;
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(ZTestResult { z, p })
}

/// Summaries keyed by system name, as compared in z-tests.
pub type SystemSummaries = BTreeMap<String, SampleSummary>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::default_symbols;

    #[test]
    fn syllable_examples() {
        let en = SyllableRule::english();
        let cs = SyllableRule::czech();
        let de = SyllableRule::german();
        assert_eq!(en.count("a"), 1);
        assert_eq!(en.count("president"), 3);
        assert_eq!(en.count("Parliament"), 3);
        assert_eq!(cs.count("vlk"), 1);
        assert_eq!(cs.count("Brno"), 2);
        assert_eq!(cs.count("nesl"), 2);
        assert_eq!(cs.count("krk"), 1);
        assert_eq!(cs.count("mluvit"), 2);
        assert_eq!(cs.count("krátký"), 2);
        assert_eq!(cs.count("rty"), 1);
        assert_eq!(cs.count("v"), 0);
        assert_eq!(de.count("Bäume"), 2);
        assert_eq!(de.count("Haus"), 1);
        assert_eq!(en.count("rhythm"), 1);
        assert_eq!(en.count("42"), 0);
        assert_eq!(en.count(","), 0);
    }

    #[test]
    fn compression_examples() {
        let en = SyllableRule::english();
        let x = ["the", "house", "is", "red"];
        let r = compression(&x, &en, &x, &en).unwrap();
        assert_eq!((r.syllables, r.characters), (1.0, 1.0));
        // 10 syllables vs 5
        let src = ["banana", "banana", "bana", "bana"];
        let tgt = ["banana", "ba", "ba"];
        assert_eq!(count_text_syllables(&src, &en), 10);
        let r = compression(&src, &en, &tgt, &en).unwrap();
        assert_eq!(r.syllables, 0.5);
        assert!(matches!(
            compression(&["42"], &en, &x, &en),
            Err(Error::ZeroSource)
        ));
    }

    #[test]
    fn compression_report_averages_documents() {
        let docs = vec![
            DocumentCompression {
                doc_id: "a".into(),
                ratio: CompressionRatio {
                    syllables: 1.0,
                    characters: 0.8,
                },
            },
            DocumentCompression {
                doc_id: "b".into(),
                ratio: CompressionRatio {
                    syllables: 1.2,
                    characters: 1.0,
                },
            },
        ];
        let r = CompressionReport::from_documents(docs);
        let s = r.syllables.unwrap();
        assert!((s.mean - 1.1).abs() < 1e-12 && (s.std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let syms = default_symbols();
        let t = build_rank_table(&["a", "a", "b"], &syms).unwrap();
        assert_eq!((t.rank("a"), t.rank("b")), (Some(1), Some(2)));
        let t = build_rank_table(&["b", "a"], &syms).unwrap();
        assert_eq!((t.rank("a"), t.rank("b")), (Some(1), Some(2)));
        let t = build_rank_table(&[",", "x", ".", ","], &syms).unwrap();
        assert_eq!(t.len(), 1);
        assert!(matches!(
            build_rank_table(&[".", ","], &syms),
            Err(Error::EmptyCorpus)
        ));
        assert_eq!(RankTable::parse_tsv(&t.to_tsv()).unwrap(), t);
        assert!(RankTable::parse_tsv("a\t1\nb\t3\n").is_err());
    }

    #[test]
    fn zipf_ranks_match_sort_oracle() {
        // word i appears 100 / (i + 1) times
        let mut tokens = Vec::new();
        for i in 0..100usize {
            for _ in 0..(100 / (i + 1)) {
                tokens.push(format!("w{i:03}"));
            }
        }
        let table = build_rank_table(&tokens, &default_symbols()).unwrap();
        let mut counts: Vec<(String, usize)> = (0..100usize)
            .map(|i| (format!("w{i:03}"), 100 / (i + 1)))
            .collect();
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (i, (w, _)) in counts.iter().enumerate() {
            assert_eq!(table.rank(w), Some(i + 1));
        }
    }

    #[test]
    fn log_rank_examples() {
        let syms = default_symbols();
        let t = build_rank_table(&["a"], &syms).unwrap();
        let r = log_rank_stats(&["a"], &t, &syms, LogBase::E, OovPolicy::Exclude).unwrap();
        assert_eq!(r.mean, Some(0.0));

        let mut tsv = String::new();
        for i in 1..=100 {
            tsv.push_str(&format!("w{i}\t{i}\n"));
        }
        let t = RankTable::parse_tsv(&tsv).unwrap();
        let r = log_rank_stats(
            &["w1", "w7", ".", "zzz"],
            &t,
            &syms,
            LogBase::E,
            OovPolicy::Exclude,
        )
        .unwrap();
        let expected = (0.0 + 7f64.ln()) / 2.0;
        assert!((r.mean.unwrap() - expected).abs() < 1e-12);
        assert_eq!((r.tokens, r.oov, r.sample_size), (3, 1, 2));
        assert!((r.oov_proportion - 1.0 / 3.0).abs() < 1e-12);
        // ranks {1, 100} in base 10: (0 + 2) / 2
        let r =
            log_rank_stats(&["w100", "w1"], &t, &syms, LogBase::Ten, OovPolicy::Exclude).unwrap();
        assert_eq!(r.mean, Some(1.0));
        assert_eq!(r.std, Some(1.0));

        let past = log_rank_stats(&["zzz"], &t, &syms, LogBase::E, OovPolicy::RankPastEnd).unwrap();
        assert_eq!(past.mean, Some(101f64.ln()));
        let none = log_rank_stats(&["zzz"], &t, &syms, LogBase::E, OovPolicy::Exclude).unwrap();
        assert_eq!((none.mean, none.oov_proportion), (None, 1.0));
    }

    #[test]
    fn z_examples() {
        let r = two_sample_z(
            SampleSummary::new(1.0, 1.0, 100),
            SampleSummary::new(1.0, 2.0, 50),
        )
        .unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
        let r = two_sample_z(
            SampleSummary::new(1.0, 1.0, 100),
            SampleSummary::new(0.0, 1.0, 100),
        )
        .unwrap();
        assert!((r.z - 50f64.sqrt()).abs() < 1e-12);
        let r = two_sample_z(
            SampleSummary::new(6.42, 2.89, 32488),
            SampleSummary::new(6.16, 2.85, 32703),
        )
        .unwrap();
        let closed = 0.26 / (2.89f64.powi(2) / 32488.0 + 2.85f64.powi(2) / 32703.0).sqrt();
        assert!((r.z - closed).abs() < 1e-9);
        assert!(r.p < 0.01 && r.p > 0.0);
        assert!(matches!(
            two_sample_z(
                SampleSummary::new(1.0, 0.0, 5),
                SampleSummary::new(2.0, 0.0, 5)
            ),
            Err(Error::DegenerateVariance)
        ));
        let r = two_sample_z(
            SampleSummary::new(3.0, 0.0, 5),
            SampleSummary::new(3.0, 0.0, 5),
        )
        .unwrap();
        assert_eq!((r.z, r.p), (0.0, 1.0));
        assert!(two_sample_z(
            SampleSummary::new(0.0, 1.0, 1),
            SampleSummary::new(0.0, 1.0, 5)
        )
        .is_err());
        // huge z still has a positive p
        let r = two_sample_z(
            SampleSummary::new(100.0, 0.1, 1000),
            SampleSummary::new(0.0, 0.1, 1000),
        )
        .unwrap();
        assert!(r.p > 0.0);
    }
}
