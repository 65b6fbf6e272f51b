//! End-to-end experiment runner and report rendering.
//!
//! An experiment is described by a TOML file:
//!
//! ```toml
//! source_language = "en"
//!
//! [aligner.em]
//! iterations = 5
//!
//! [[systems]]
//! name = "cs-int"
//! kind = "interpreter"
//! language = "cs"
//!
//! [[documents]]
//! doc_id = "d1"
//! source = "d1.en.tsv"
//! outputs = { cs-int = "d1.cs.tsv" }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aligner::{train_bidirectional, AlignerConfig, AlignmentSet, BidirectionalModel};
use crate::error::{Error, Result};
use crate::ingest::{
    parse_incremental_log, parse_timed_transcript, read_parallel_corpus, ParallelCorpus,
    TimedTranscript, Tokenizer, Track,
};
use crate::latency::{
    finalized_transcript, link_latencies, relay_samples, summarize_with, LatencyReport,
    LatencySample, RelayPath, DEFAULT_PERCENTILES,
};
use crate::quality::{
    aggregate_annotations, bleu, parse_annotations, AnnotationSummary, BleuConfig, BleuReport,
    Segmentation,
};
use crate::textmetrics::{
    build_rank_table, compression, log_rank_stats, two_sample_z, ComplexityReport,
    CompressionReport, DocumentCompression, LogBase, OovPolicy, RankTable, SampleSummary,
    SyllableRule, ZTestResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Human interpreting with word timestamps (timed TSV).
    Interpreter,
    /// Re-translating MT of the source speech (incremental log).
    Mt,
    /// MT of an interpreter's speech (incremental log), see `via`.
    Relay,
    /// Reference translation (plain text).
    Reference,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayMode {
    /// Align source and relay output directly.
    #[default]
    Direct,
    /// Compose source→interpreter and interpreter→output alignments.
    Compose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub name: String,
    pub kind: SystemKind,
    pub language: String,
    /// Interpreter system whose speech a relay system translates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via: Option<String>,
    #[serde(default)]
    pub relay_mode: RelayMode,
    /// Extra sentence-aligned data (source side, target side) for alignment training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_corpus: Option<(PathBuf, PathBuf)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentConfig {
    pub doc_id: String,
    pub source: PathBuf,
    #[serde(default)]
    pub outputs: BTreeMap<String, PathBuf>,
    /// End of the MT session; defaults to each log's last event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyConfig {
    pub percentiles: Vec<f64>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            percentiles: DEFAULT_PERCENTILES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityConfig {
    /// Plain-text corpus to rank words by frequency.
    pub rank_corpus: Option<PathBuf>,
    /// Precomputed `word<TAB>rank` table; takes precedence over `rank_corpus`.
    pub rank_table: Option<PathBuf>,
    /// Only systems in this language are scored.
    pub language: Option<String>,
    pub log_base: LogBase,
    pub oov: OovPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuPair {
    pub system: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTestPair {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source_language: String,
    #[serde(default)]
    pub tokenizer: Tokenizer,
    /// Tokens removed before vocabulary statistics.
    #[serde(default = "default_symbol_list")]
    pub symbols: Vec<String>,
    #[serde(default)]
    pub aligner: AlignerConfig,
    #[serde(default)]
    pub latency: LatencyConfig,
    #[serde(default)]
    pub complexity: ComplexityConfig,
    #[serde(default)]
    pub bleu: BleuConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub systems: Vec<SystemConfig>,
    #[serde(default)]
    pub documents: Vec<DocumentConfig>,
    #[serde(default)]
    pub bleu_pairs: Vec<BleuPair>,
    #[serde(default)]
    pub z_tests: Vec<ZTestPair>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_symbol_list() -> Vec<String> {
    vec![",".into(), ".".into()]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        Self::from_toml_with(text, base_dir, &[])
    }

    /// Parses `text` after applying `key=value` overrides. Keys are dotted
    /// paths such as `latency.percentiles` or `aligner.em.iterations`;
    /// values are TOML literals, or bare strings when they do not parse.
    pub fn from_toml_with(
        text: &str,
        base_dir: impl Into<PathBuf>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let invalid = |e: &dyn std::fmt::Display| Error::ConfigInvalid(e.to_string());
        let mut table: toml::Table = toml::from_str(text).map_err(|e| invalid(&e))?;
        for (key, raw) in overrides {
            let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.clone()));
            let mut parts: Vec<&str> = key.split('.').collect();
            let last = parts
                .pop()
                .filter(|k| !k.is_empty())
                .ok_or_else(|| invalid(&format!("empty key `{key}`")))?;
            let mut node = &mut table;
            for part in parts {
                node = node
                    .entry(part)
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                    .as_table_mut()
                    .ok_or_else(|| invalid(&format!("`{part}` in `{key}` is not a table")))?;
            }
            node.insert(last.to_owned(), value);
        }
        let mut cfg: Self = table.try_into().map_err(|e| invalid(&e))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(path, &[])
    }

    pub fn load_with(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_with(&text, base, overrides)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn system(&self, name: &str) -> Option<&SystemConfig> {
        self.systems.iter().find(|s| s.name == name)
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// Checks structure and that every referenced path exists.
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::ConfigInvalid(m));
        if let Some(p) = self
            .latency
            .percentiles
            .iter()
            .find(|p| !(**p > 0.0 && **p <= 100.0))
        {
            return invalid(format!("percentile {p} outside (0, 100]"));
        }
        if self.aligner.trim_length == 0 {
            return invalid("aligner.trim_length must be at least 1".into());
        }
        if self.bleu.max_order == 0 {
            return invalid("bleu.max_order must be at least 1".into());
        }
        let mut names = HashSet::new();
        for s in &self.systems {
            if !names.insert(s.name.as_str()) {
                return invalid(format!("duplicate system `{}`", s.name));
            }
        }
        for s in &self.systems {
            if s.kind == SystemKind::Relay {
                match s.via.as_deref().and_then(|v| self.system(v)) {
                    Some(v) if v.kind == SystemKind::Interpreter => {}
                    _ => {
                        return invalid(format!(
                            "relay `{}` needs `via` naming an interpreter system",
                            s.name
                        ))
                    }
                }
            }
            if let Some((a, b)) = &s.extra_corpus {
                self.require(a)?;
                self.require(b)?;
            }
        }
        for pair in &self.bleu_pairs {
            if self.system(&pair.system).is_none() {
                return invalid(format!("unknown BLEU system `{}`", pair.system));
            }
            match self.system(&pair.reference) {
                Some(_) => {}
                None => return invalid(format!("unknown BLEU reference `{}`", pair.reference)),
            }
        }
        for z in &self.z_tests {
            for n in [&z.a, &z.b] {
                if self.system(n).is_none() {
                    return invalid(format!("unknown z-test system `{n}`"));
                }
            }
        }
        let mut ids = HashSet::new();
        for d in &self.documents {
            if !ids.insert(d.doc_id.as_str()) {
                return invalid(format!("duplicate document `{}`", d.doc_id));
            }
            self.require(&d.source)?;
            for (sys, p) in &d.outputs {
                if self.system(sys).is_none() {
                    return invalid(format!(
                        "document `{}` names unknown system `{sys}`",
                        d.doc_id
                    ));
                }
                self.require(p)?;
            }
        }
        for p in [
            &self.complexity.rank_corpus,
            &self.complexity.rank_table,
            &self.annotations,
        ]
        .into_iter()
        .flatten()
        {
            self.require(p)?;
        }
        Ok(())
    }

    fn require(&self, p: &Path) -> Result<()> {
        let full = self.resolve(p);
        if full.exists() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "path {} does not exist",
                full.display()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub tokenizer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub system: String,
    pub report: LatencyReport,
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionRow {
    pub system: String,
    pub report: CompressionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub system: String,
    pub report: ComplexityReport,
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZTestRow {
    pub a: String,
    pub b: String,
    pub result: ZTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuRow {
    pub system: String,
    pub reference: String,
    pub agg: BleuReport,
    pub one: BleuReport,
    pub documents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub documents: Vec<String>,
    pub failures: Vec<Failure>,
    pub latency: Vec<LatencyRow>,
    pub compression: Vec<CompressionRow>,
    pub complexity: Vec<ComplexityRow>,
    pub z_tests: Vec<ZTestRow>,
    pub bleu: Vec<BleuRow>,
    pub annotations: Vec<AnnotationSummary>,
}

impl RunReport {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// One system's output for one document.
#[derive(Debug, Clone)]
enum Output {
    Timed(TimedTranscript),
    Text(Vec<String>),
}

impl Output {
    fn tokens(&self) -> Vec<String> {
        match self {
            Output::Timed(t) => t.surfaces(),
            Output::Text(t) => t.clone(),
        }
    }

    fn timed(&self) -> Option<&TimedTranscript> {
        match self {
            Output::Timed(t) => Some(t),
            Output::Text(_) => None,
        }
    }
}

#[derive(Debug)]
struct LoadedDocument {
    doc_id: String,
    source: TimedTranscript,
    outputs: BTreeMap<String, Output>,
}

fn load_output(
    cfg: &ExperimentConfig,
    doc: &DocumentConfig,
    system: &SystemConfig,
    path: &Path,
) -> Result<Output> {
    let full = cfg.resolve(path);
    match system.kind {
        SystemKind::Interpreter => {
            let mut t = parse_timed_transcript(&full, Track::Interpreter, &system.language)?;
            check_doc_id(&doc.doc_id, &mut t)?;
            Ok(Output::Timed(t))
        }
        SystemKind::Mt | SystemKind::Relay => {
            let mut log = parse_incremental_log(&full, doc.session_end)?;
            log.doc_id = doc.doc_id.clone();
            Ok(Output::Timed(finalized_transcript(
                &log,
                &cfg.tokenizer,
                &system.language,
            )?))
        }
        SystemKind::Reference => {
            let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
            Ok(Output::Text(cfg.tokenizer.tokenize(&text)))
        }
    }
}

fn check_doc_id(expected: &str, t: &mut TimedTranscript) -> Result<()> {
    if t.is_empty() {
        t.doc_id = expected.to_owned();
    }
    if t.doc_id != expected {
        return Err(Error::DocMismatch {
            expected: expected.to_owned(),
            found: t.doc_id.clone(),
        });
    }
    Ok(())
}

fn load_document(
    cfg: &ExperimentConfig,
    doc: &DocumentConfig,
) -> (Option<LoadedDocument>, Vec<Failure>) {
    let mut failures = Vec::new();
    let fail = |system: Option<&str>, e: Error| Failure {
        doc_id: doc.doc_id.clone(),
        system: system.map(str::to_owned),
        error: e.to_string(),
    };
    let source = parse_timed_transcript(
        cfg.resolve(&doc.source),
        Track::Source,
        &cfg.source_language,
    )
    .and_then(|mut t| check_doc_id(&doc.doc_id, &mut t).map(|_| t));
    let source = match source {
        Ok(s) => s,
        Err(e) => return (None, vec![fail(None, e)]),
    };
    let mut outputs = BTreeMap::new();
    for (name, path) in &doc.outputs {
        let system = cfg.system(name).expect("validated");
        match load_output(cfg, doc, system, path) {
            Ok(o) => {
                outputs.insert(name.clone(), o);
            }
            Err(e) => failures.push(fail(Some(name), e)),
        }
    }
    (
        Some(LoadedDocument {
            doc_id: doc.doc_id.clone(),
            source,
            outputs,
        }),
        failures,
    )
}

fn load_extra(cfg: &ExperimentConfig, system: &SystemConfig) -> Result<Option<ParallelCorpus>> {
    match &system.extra_corpus {
        None => Ok(None),
        Some((a, b)) => {
            let (corpus, _) = read_parallel_corpus(cfg.resolve(a), cfg.resolve(b), &cfg.tokenizer)?;
            Ok(Some(corpus))
        }
    }
}

fn train_pairs(
    cfg: &ExperimentConfig,
    pairs: &[(Vec<String>, Vec<String>)],
    extra: Option<&ParallelCorpus>,
) -> Result<BidirectionalModel> {
    train_bidirectional(pairs, extra, &cfg.aligner)
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    docs: Vec<LoadedDocument>,
    failures: Vec<Failure>,
    /// Pruned source→system alignments of interpreter systems, reused by relays.
    interpreter_links: BTreeMap<(String, String), AlignmentSet>,
}

impl Run<'_> {
    fn fail(&mut self, doc_id: &str, system: &str, e: Error) {
        self.failures.push(Failure {
            doc_id: doc_id.to_owned(),
            system: Some(system.to_owned()),
            error: e.to_string(),
        });
    }

    fn timed_docs(&self, system: &str) -> Vec<(usize, TimedTranscript)> {
        self.docs
            .iter()
            .enumerate()
            .filter_map(|(i, d)| {
                d.outputs
                    .get(system)
                    .and_then(Output::timed)
                    .map(|t| (i, t.clone()))
            })
            .collect()
    }

    fn latency_row(
        &self,
        name: String,
        samples: Vec<LatencySample>,
        linked: usize,
        source_words: usize,
        documents: Vec<String>,
    ) -> Option<LatencyRow> {
        summarize_with(&samples, &self.cfg.latency.percentiles)
            .ok()
            .map(|r| LatencyRow {
                system: name,
                report: r.with_coverage(linked, source_words),
                documents,
            })
    }

    /// Latency of a system whose words are produced relative to the source.
    fn direct_latency(&mut self, system: &SystemConfig) -> Result<Option<LatencyRow>> {
        let outputs = self.timed_docs(&system.name);
        if outputs.is_empty() {
            return Ok(None);
        }
        let pairs: Vec<(Vec<String>, Vec<String>)> = outputs
            .iter()
            .map(|(i, t)| (self.docs[*i].source.surfaces(), t.surfaces()))
            .collect();
        let extra = load_extra(self.cfg, system)?;
        let model = train_pairs(self.cfg, &pairs, extra.as_ref())?;
        let mut samples = Vec::new();
        let (mut linked, mut words, mut documents) = (0, 0, Vec::new());
        for (i, tgt) in &outputs {
            let doc = &self.docs[*i];
            let result = model.align_timed(&doc.source, tgt).and_then(|links| {
                let s = link_latencies(&links, &doc.source.start_times(), &tgt.start_times())?;
                Ok((links, s))
            });
            match result {
                Ok((links, s)) => {
                    linked += links.linked_sources().len();
                    words += doc.source.len();
                    samples.extend(s);
                    documents.push(doc.doc_id.clone());
                    if system.kind == SystemKind::Interpreter {
                        self.interpreter_links
                            .insert((system.name.clone(), doc.doc_id.clone()), links);
                    }
                }
                Err(e) => {
                    let id = doc.doc_id.clone();
                    self.fail(&id, &system.name, e);
                }
            }
        }
        Ok(self.latency_row(system.name.clone(), samples, linked, words, documents))
    }

    /// Relay latency plus the interpreter→MT leg on its own.
    fn relay_latency(&mut self, system: &SystemConfig) -> Result<Vec<LatencyRow>> {
        let via = system.via.clone().expect("validated");
        let outputs: Vec<(usize, TimedTranscript, TimedTranscript)> = self
            .timed_docs(&system.name)
            .into_iter()
            .filter_map(|(i, t)| {
                let mid = self.docs[i]
                    .outputs
                    .get(&via)
                    .and_then(Output::timed)?
                    .clone();
                Some((i, mid, t))
            })
            .collect();
        if outputs.is_empty() {
            return Ok(Vec::new());
        }
        let extra = load_extra(self.cfg, system)?;
        let leg_pairs: Vec<(Vec<String>, Vec<String>)> = outputs
            .iter()
            .map(|(_, m, t)| (m.surfaces(), t.surfaces()))
            .collect();
        let leg_model = train_pairs(self.cfg, &leg_pairs, extra.as_ref())?;
        let direct_model = match system.relay_mode {
            RelayMode::Direct => {
                let pairs: Vec<(Vec<String>, Vec<String>)> = outputs
                    .iter()
                    .map(|(i, _, t)| (self.docs[*i].source.surfaces(), t.surfaces()))
                    .collect();
                Some(train_pairs(self.cfg, &pairs, None)?)
            }
            RelayMode::Compose => None,
        };

        let mut relay = Vec::new();
        let mut leg = Vec::new();
        let (mut linked, mut words, mut leg_linked, mut leg_words) = (0, 0, 0, 0);
        let mut documents = Vec::new();
        for (i, mid, tgt) in &outputs {
            let doc = &self.docs[*i];
            let fin = records_of(tgt);
            let step = || -> Result<(AlignmentSet, Vec<LatencySample>, AlignmentSet, Vec<LatencySample>)> {
                let mid_tgt = leg_model.align_timed(mid, tgt)?;
                let leg_samples = link_latencies(&mid_tgt, &mid.start_times(), &tgt.start_times())?;
                let (links, samples) = match &direct_model {
                    Some(m) => {
                        let src_tgt = m.align_timed(&doc.source, tgt)?;
                        let s = relay_samples(&doc.source, mid, &fin, RelayPath::Direct { src_tgt: &src_tgt })?;
                        (src_tgt, s)
                    }
                    None => {
                        let src_mid = self
                            .interpreter_links
                            .get(&(via.clone(), doc.doc_id.clone()))
                            .ok_or_else(|| Error::InvalidArgument(format!("no `{via}` alignment")))?;
                        let s = relay_samples(&doc.source, mid, &fin, RelayPath::Compose { src_mid, mid_tgt: &mid_tgt })?;
                        let composed = crate::aligner::compose(src_mid, &mid_tgt)?;
                        (composed, s)
                    }
                };
                Ok((links, samples, mid_tgt, leg_samples))
            };
            match step() {
                Ok((links, samples, mid_tgt, leg_samples)) => {
                    linked += links.linked_sources().len();
                    words += doc.source.len();
                    leg_linked += mid_tgt.linked_sources().len();
                    leg_words += mid.len();
                    relay.extend(samples);
                    leg.extend(leg_samples);
                    documents.push(doc.doc_id.clone());
                }
                Err(e) => {
                    let id = doc.doc_id.clone();
                    self.fail(&id, &system.name, e);
                }
            }
        }
        let mut rows = Vec::new();
        rows.extend(self.latency_row(system.name.clone(), relay, linked, words, documents.clone()));
        rows.extend(self.latency_row(
            format!("{} [{via} leg]", system.name),
            leg,
            leg_linked,
            leg_words,
            documents,
        ));
        Ok(rows)
    }
}

fn records_of(t: &TimedTranscript) -> Vec<crate::latency::FinalizationRecord> {
    t.words
        .iter()
        .map(|w| crate::latency::FinalizationRecord {
            index: w.index,
            word: w.surface.clone(),
            time: w.start,
        })
        .collect()
}

fn load_documents(
    cfg: &ExperimentConfig,
    docs: &[&DocumentConfig],
) -> Vec<(Option<LoadedDocument>, Vec<Failure>)> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        docs.par_iter().map(|d| load_document(cfg, d)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        docs.iter().map(|d| load_document(cfg, d)).collect()
    }
}

/// Runs every configured analysis. Per-document problems are collected in
/// [`RunReport::failures`] rather than aborting the run.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunReport> {
    if cfg.documents.is_empty() {
        return Err(Error::NoDocuments);
    }
    cfg.validate()?;
    let mut ordered: Vec<&DocumentConfig> = cfg.documents.iter().collect();
    ordered.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut run = Run {
        cfg,
        docs: Vec::new(),
        failures: Vec::new(),
        interpreter_links: BTreeMap::new(),
    };
    for (doc, failures) in load_documents(cfg, &ordered) {
        run.failures.extend(failures);
        run.docs.extend(doc);
    }
    if run.docs.is_empty() {
        return Err(Error::NoDocuments);
    }

    // Latency: interpreters first so relays can reuse their alignments.
    let mut latency = Vec::new();
    let mut timed: Vec<&SystemConfig> = cfg
        .systems
        .iter()
        .filter(|s| s.kind != SystemKind::Reference)
        .collect();
    timed.sort_by_key(|s| s.kind != SystemKind::Interpreter);
    let mut latency_by_name = BTreeMap::new();
    for system in timed {
        let rows = match system.kind {
            SystemKind::Relay => run.relay_latency(system)?,
            _ => run.direct_latency(system)?.into_iter().collect(),
        };
        for row in rows {
            latency_by_name.insert(row.system.clone(), row);
        }
    }
    // Report rows in config order, each relay followed by its leg.
    for system in &cfg.systems {
        if let Some(row) = latency_by_name.remove(&system.name) {
            latency.push(row);
        }
        let leg_prefix = format!("{} [", system.name);
        let legs: Vec<String> = latency_by_name
            .keys()
            .filter(|k| k.starts_with(&leg_prefix))
            .cloned()
            .collect();
        for k in legs {
            latency.extend(latency_by_name.remove(&k));
        }
    }

    let compression_rows = compression_section(&mut run);
    let (complexity_rows, z_rows) = complexity_section(&mut run)?;
    let bleu_rows = bleu_section(&run)?;
    let annotations = match &cfg.annotations {
        Some(p) => {
            let full = cfg.resolve(p);
            let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
            aggregate_annotations(&parse_annotations(&text)?)?
        }
        None => Vec::new(),
    };

    Ok(RunReport {
        provenance: Provenance {
            tool: "lagmeter".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            tokenizer: cfg.tokenizer.describe(),
        },
        documents: run.docs.iter().map(|d| d.doc_id.clone()).collect(),
        failures: run.failures,
        latency,
        compression: compression_rows,
        complexity: complexity_rows,
        z_tests: z_rows,
        bleu: bleu_rows,
        annotations,
    })
}

fn compression_section(run: &mut Run<'_>) -> Vec<CompressionRow> {
    let cfg = run.cfg;
    let Ok(src_rule) = SyllableRule::for_language(&cfg.source_language) else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for system in &cfg.systems {
        let Ok(rule) = SyllableRule::for_language(&system.language) else {
            continue;
        };
        let mut docs = Vec::new();
        let mut failures = Vec::new();
        for d in &run.docs {
            let Some(out) = d.outputs.get(&system.name) else {
                continue;
            };
            match compression(&d.source.surfaces(), &src_rule, &out.tokens(), &rule) {
                Ok(ratio) => docs.push(DocumentCompression {
                    doc_id: d.doc_id.clone(),
                    ratio,
                }),
                Err(e) => failures.push((d.doc_id.clone(), e)),
            }
        }
        for (id, e) in failures {
            run.fail(&id, &system.name, e);
        }
        if !docs.is_empty() {
            rows.push(CompressionRow {
                system: system.name.clone(),
                report: CompressionReport::from_documents(docs),
            });
        }
    }
    rows
}

fn complexity_section(run: &mut Run<'_>) -> Result<(Vec<ComplexityRow>, Vec<ZTestRow>)> {
    let cfg = run.cfg;
    let symbols: HashSet<String> = cfg.symbols.iter().cloned().collect();
    let table = match (&cfg.complexity.rank_table, &cfg.complexity.rank_corpus) {
        (Some(t), _) => RankTable::read(cfg.resolve(t))?,
        (None, Some(c)) => {
            let full = cfg.resolve(c);
            let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
            build_rank_table(&cfg.tokenizer.tokenize(&text), &symbols)?
        }
        (None, None) => return Ok((Vec::new(), Vec::new())),
    };
    let mut rows = Vec::new();
    for system in &cfg.systems {
        if cfg
            .complexity
            .language
            .as_ref()
            .is_some_and(|l| *l != system.language)
        {
            continue;
        }
        let mut tokens = Vec::new();
        let mut documents = Vec::new();
        for d in &run.docs {
            if let Some(out) = d.outputs.get(&system.name) {
                tokens.extend(out.tokens());
                documents.push(d.doc_id.clone());
            }
        }
        if documents.is_empty() {
            continue;
        }
        let report = log_rank_stats(
            &tokens,
            &table,
            &symbols,
            cfg.complexity.log_base,
            cfg.complexity.oov,
        )?;
        rows.push(ComplexityRow {
            system: system.name.clone(),
            report,
            documents,
        });
    }
    let summary = |name: &str| {
        rows.iter().find(|r| r.system == name).and_then(|r| {
            Some(SampleSummary::new(
                r.report.mean?,
                r.report.std?,
                r.report.sample_size,
            ))
        })
    };
    let mut z_rows = Vec::new();
    for z in &cfg.z_tests {
        if let (Some(a), Some(b)) = (summary(&z.a), summary(&z.b)) {
            match two_sample_z(a, b) {
                Ok(result) => z_rows.push(ZTestRow {
                    a: z.a.clone(),
                    b: z.b.clone(),
                    result,
                }),
                Err(e) => run.failures.push(Failure {
                    doc_id: "*".into(),
                    system: Some(format!("{} vs {}", z.a, z.b)),
                    error: e.to_string(),
                }),
            }
        }
    }
    Ok((rows, z_rows))
}

fn bleu_section(run: &Run<'_>) -> Result<Vec<BleuRow>> {
    let cfg = run.cfg;
    let mut rows = Vec::new();
    for pair in &cfg.bleu_pairs {
        let mut hyps = Vec::new();
        let mut refs = Vec::new();
        let mut documents = Vec::new();
        for d in &run.docs {
            if let (Some(h), Some(r)) =
                (d.outputs.get(&pair.system), d.outputs.get(&pair.reference))
            {
                hyps.push(h.tokens());
                refs.push(r.tokens());
                documents.push(d.doc_id.clone());
            }
        }
        if documents.is_empty() {
            continue;
        }
        let agg = bleu(
            &hyps,
            &refs,
            &BleuConfig {
                mode: Segmentation::Agg,
                ..cfg.bleu
            },
        )?;
        let one = bleu(
            &hyps,
            &refs,
            &BleuConfig {
                mode: Segmentation::One,
                ..cfg.bleu
            },
        )?;
        rows.push(BleuRow {
            system: pair.system.clone(),
            reference: pair.reference.clone(),
            agg,
            one,
            documents,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

pub fn render_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn opt2(x: Option<f64>) -> String {
    x.map(f2).unwrap_or_else(|| "-".into())
}

fn pct_label(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{p:.0}%")
    } else {
        format!("{p}%")
    }
}

/// Latency table: avg ± std followed by one column per percentile.
pub fn latency_table(rows: &[LatencyRow], percentiles: &[f64]) -> String {
    let mut out = String::from("| system | avg ± std |");
    for p in percentiles {
        out.push_str(&format!(" ≤ {} |", pct_label(*p)));
    }
    out.push_str(" samples |\n|---|---:|");
    for _ in percentiles {
        out.push_str("---:|");
    }
    out.push_str("---:|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} ± {} |",
            r.system,
            f2(r.report.avg),
            f2(r.report.std)
        ));
        for p in percentiles {
            out.push_str(&format!(" {} |", opt2(r.report.percentile(*p))));
        }
        out.push_str(&format!(" {} |\n", r.report.count));
    }
    out
}

fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    let p = &report.provenance;
    out.push_str(&format!(
        "# Evaluation report\n\n{} {} · config `{}` · {} documents\n\n",
        p.tool,
        p.version,
        p.config_hash,
        report.documents.len()
    ));

    out.push_str("## Latency (seconds)\n\n");
    let percentiles: Vec<f64> = report
        .latency
        .first()
        .map(|r| r.report.percentiles.iter().map(|p| p.pct).collect())
        .unwrap_or_else(|| DEFAULT_PERCENTILES.to_vec());
    out.push_str(&latency_table(&report.latency, &percentiles));

    out.push_str(
        "\n## Length rate to source\n\n| system | syllables | characters |\n|---|---:|---:|\n",
    );
    for r in &report.compression {
        let fmt = |m: Option<crate::textmetrics::MeanStd>| {
            m.map(|m| format!("{} ± {}", f2(m.mean), f2(m.std)))
                .unwrap_or_else(|| "-".into())
        };
        out.push_str(&format!(
            "| {} | {} | {} |\n",
            r.system,
            fmt(r.report.syllables),
            fmt(r.report.characters)
        ));
    }

    out.push_str("\n## Log word frequency rank\n\n| system | avg ± std | words | OOV |\n|---|---:|---:|---:|\n");
    for r in &report.complexity {
        out.push_str(&format!(
            "| {} | {} ± {} | {} | {:.2}% |\n",
            r.system,
            opt2(r.report.mean),
            opt2(r.report.std),
            r.report.sample_size,
            r.report.oov_proportion * 100.0
        ));
    }
    if !report.z_tests.is_empty() {
        out.push_str("\n| a | b | z | p |\n|---|---|---:|---:|\n");
        for z in &report.z_tests {
            let p = if z.result.p >= 1e-3 {
                format!("{:.3}", z.result.p)
            } else {
                format!("{:.2e}", z.result.p)
            };
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                z.a,
                z.b,
                f2(z.result.z),
                p
            ));
        }
    }

    out.push_str(
        "\n## BLEU\n\n| reference | system | BLEU agg | BLEU one |\n|---|---|---:|---:|\n",
    );
    for r in &report.bleu {
        out.push_str(&format!(
            "| {} | {} | {:.1} | {:.1} |\n",
            r.reference, r.system, r.agg.score, r.one.score
        ));
    }

    if !report.annotations.is_empty() {
        out.push_str("\n## Information preserved\n\n| annotator | system | avg ± std | n |\n|---|---|---:|---:|\n");
        for a in &report.annotations {
            out.push_str(&format!(
                "| {} | {} | {} ± {} | {} |\n",
                a.annotator,
                a.system,
                f2(a.mean),
                f2(a.std),
                a.n
            ));
        }
    }

    if !report.failures.is_empty() {
        out.push_str("\n## Failures\n\n| document | system | error |\n|---|---|---|\n");
        for f in &report.failures {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                f.doc_id,
                f.system.as_deref().unwrap_or("-"),
                f.error.replace('|', "\\|")
            ));
        }
    }
    out
}

fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("section,system,metric,value\n");
    let mut row = |section: &str, system: &str, metric: &str, value: f64| {
        out.push_str(&format!("{section},{system},{metric},{value}\n"));
    };
    for r in &report.latency {
        row("latency", &r.system, "avg", r.report.avg);
        row("latency", &r.system, "std", r.report.std);
        for p in &r.report.percentiles {
            row("latency", &r.system, &format!("p{}", p.pct), p.value);
        }
        row("latency", &r.system, "samples", r.report.count as f64);
    }
    for r in &report.compression {
        if let (Some(s), Some(c)) = (r.report.syllables, r.report.characters) {
            row("compression", &r.system, "syllables_avg", s.mean);
            row("compression", &r.system, "syllables_std", s.std);
            row("compression", &r.system, "characters_avg", c.mean);
            row("compression", &r.system, "characters_std", c.std);
        }
    }
    for r in &report.complexity {
        if let (Some(m), Some(s)) = (r.report.mean, r.report.std) {
            row("complexity", &r.system, "log_rank_avg", m);
            row("complexity", &r.system, "log_rank_std", s);
        }
        row(
            "complexity",
            &r.system,
            "words",
            r.report.sample_size as f64,
        );
        row(
            "complexity",
            &r.system,
            "oov_proportion",
            r.report.oov_proportion,
        );
    }
    for z in &report.z_tests {
        let name = format!("{} vs {}", z.a, z.b);
        row("z_test", &name, "z", z.result.z);
        row("z_test", &name, "p", z.result.p);
    }
    for r in &report.bleu {
        let name = format!("{} vs {}", r.system, r.reference);
        row("bleu", &name, "agg", r.agg.score);
        row("bleu", &name, "one", r.one.score);
    }
    for a in &report.annotations {
        let name = format!("{}/{}", a.annotator, a.system);
        row("annotations", &name, "avg", a.mean);
        row("annotations", &name, "std", a.std);
    }
    out
}

/// Document ids with at least one failure.
pub fn failed_documents(report: &RunReport) -> BTreeSet<&str> {
    report.failures.iter().map(|f| f.doc_id.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_documents() {
        let cfg = ExperimentConfig::from_toml("source_language = \"en\"\n", ".").unwrap();
        assert!(matches!(run_pipeline(&cfg), Err(Error::NoDocuments)));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = ExperimentConfig::from_toml(
            "source_language = \"en\"\n[latency]\npercentiles = [0.0]\n",
            ".",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
        assert!(ExperimentConfig::from_toml("source_language = 3\n", ".").is_err());
        let relay = ExperimentConfig::from_toml(
            "source_language = \"en\"\n[[systems]]\nname = \"x\"\nkind = \"relay\"\nlanguage = \"cs\"\n",
            ".",
        )
        .unwrap();
        assert!(relay.validate().is_err());
    }

    #[test]
    fn overrides() {
        let set = |k: &str, v: &str| (k.to_owned(), v.to_owned());
        let cfg = ExperimentConfig::from_toml_with(
            "source_language = \"en\"\n[aligner.em]\niterations = 3\n",
            ".",
            &[
                set("aligner.em.iterations", "7"),
                set("latency.percentiles", "[50.0, 95.0]"),
                set("source_language", "de"),
                set("complexity.log_base", "10"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.aligner.em.iterations, 7);
        assert_eq!(cfg.latency.percentiles, [50.0, 95.0]);
        assert_eq!(cfg.source_language, "de");
        assert_eq!(cfg.complexity.log_base, LogBase::Ten);
        assert!(ExperimentConfig::from_toml_with(
            "source_language = \"en\"\n",
            ".",
            &[set("source_language.x", "1")]
        )
        .is_err());
    }

    #[test]
    fn empty_sections_render_headers_only() {
        let report = RunReport {
            provenance: Provenance {
                tool: "t".into(),
                version: "0".into(),
                config_hash: "h".into(),
                tokenizer: "x".into(),
            },
            documents: vec![],
            failures: vec![],
            latency: vec![],
            compression: vec![],
            complexity: vec![],
            z_tests: vec![],
            bleu: vec![],
            annotations: vec![],
        };
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.contains("| system | avg ± std | ≤ 50% | ≤ 90% | ≤ 99% | samples |\n|---|---:|---:|---:|---:|---:|\n\n## Length"));
        assert_eq!(
            render_report(&report, ReportFormat::Csv),
            "section,system,metric,value\n"
        );
    }

    #[test]
    fn one_latency_row() {
        use crate::aligner::AlignmentLink;
        use crate::latency::{summarize, LatencySample};
        let samples: Vec<LatencySample> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&v| LatencySample {
                link: AlignmentLink::new(0, 0),
                src_time: 0.0,
                tgt_time: v,
                latency: v,
            })
            .collect();
        let row = LatencyRow {
            system: "cs-int".into(),
            report: summarize(&samples).unwrap(),
            documents: vec!["d".into()],
        };
        let table = latency_table(&[row], &DEFAULT_PERCENTILES);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[2],
            "| cs-int | 2.33 ± 1.25 | 2.00 | 4.00 | 4.00 | 3 |"
        );
    }
}
