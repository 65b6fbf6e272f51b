//! Per-document corpus manifests and the size statistics derived from them.
//!
//! A manifest file holds one JSON record per line:
//!
//! ```json
//! {"doc_id": "d1", "split": "test", "delivery": "read", "trainset_overlap": false,
//!  "tracks": {"en": {"track": "source", "language": "en", "duration_s": 312.4,
//!                    "timed": "d1.en.tsv", "versions": {"revised": "d1.en.rev.txt"}}}}
//! ```
//!
//! Paths are resolved relative to the manifest's directory. Plain transcript
//! files hold one sentence per line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::transcript::{parse_timed_transcript, Track};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Revised,
    Verbatim,
    Ortho,
}

/// What a version's unit count measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountUnit {
    Sentence,
    Document,
}

impl Version {
    /// Verbatim transcripts carry no punctuation, so they are counted per document.
    pub fn count_unit(self) -> CountUnit {
        match self {
            Version::Verbatim => CountUnit::Document,
            Version::Revised | Version::Ortho => CountUnit::Sentence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delivery {
    Read,
    Spontaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub track: Track,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timed: Option<PathBuf>,
    #[serde(default)]
    pub versions: BTreeMap<Version, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentManifest {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub delivery: Delivery,
    /// Set when the speaker also appears in an external training set.
    #[serde(default)]
    pub trainset_overlap: bool,
    pub tracks: BTreeMap<String, TrackEntry>,
}

/// Unit and word counts for one (track, version) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionStats {
    pub track: String,
    pub version: Version,
    pub unit: CountUnit,
    pub units: usize,
    pub words: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestStats {
    pub documents: usize,
    pub cells: Vec<VersionStats>,
    /// Summed durations per track in seconds.
    pub durations: BTreeMap<String, f64>,
}

impl ManifestStats {
    pub fn to_markdown(&self) -> String {
        let mut out =
            String::from("| track | version | unit | units | words |\n|---|---|---|---:|---:|\n");
        for c in &self.cells {
            out.push_str(&format!(
                "| {} | {:?} | {:?} | {} | {} |\n",
                c.track, c.version, c.unit, c.units, c.words
            ));
        }
        for (track, secs) in &self.durations {
            out.push_str(&format!(
                "| {track} | Duration | | {} | |\n",
                format_hms(*secs)
            ));
        }
        out
    }
}

fn format_hms(secs: f64) -> String {
    let total = secs.round() as u64;
    format!("{}h{}m{}s", total / 3600, (total % 3600) / 60, total % 60)
}

/// Parses a JSON-lines manifest without touching referenced files.
pub fn parse_manifest(input: &str) -> Result<Vec<DocumentManifest>> {
    let mut docs = Vec::new();
    for (n, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: DocumentManifest =
            serde_json::from_str(line).map_err(|e| Error::malformed(n + 1, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

fn count_words(text: &str) -> usize {
    tokenize(text)
        .iter()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .count()
}

/// Loads a manifest, checks that every referenced file exists and parses,
/// and tallies units and words per (track, version).
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<(Vec<DocumentManifest>, ManifestStats)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let docs = parse_manifest(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let stats = tally(&docs, base)?;
    Ok((docs, stats))
}

fn tally(docs: &[DocumentManifest], base: &Path) -> Result<ManifestStats> {
    let mut cells: BTreeMap<(String, Version), VersionStats> = BTreeMap::new();
    let mut durations = BTreeMap::new();
    for doc in docs {
        for (name, entry) in &doc.tracks {
            if let Some(timed) = &entry.timed {
                let t = parse_timed_transcript(base.join(timed), entry.track, &entry.language)?;
                if t.doc_id != doc.doc_id && !t.is_empty() {
                    return Err(Error::DocMismatch {
                        expected: doc.doc_id.clone(),
                        found: t.doc_id,
                    });
                }
            }
            for (&version, file) in &entry.versions {
                let full = base.join(file);
                let content = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let sentences = content.lines().filter(|l| !l.trim().is_empty()).count();
                let cell = cells
                    .entry((name.clone(), version))
                    .or_insert_with(|| VersionStats {
                        track: name.clone(),
                        version,
                        unit: version.count_unit(),
                        units: 0,
                        words: 0,
                    });
                cell.units += match version.count_unit() {
                    CountUnit::Document => 1,
                    CountUnit::Sentence => sentences,
                };
                cell.words += count_words(&content);
            }
            if let Some(d) = entry.duration_s {
                *durations.entry(name.clone()).or_insert(0.0) += d;
            }
        }
    }
    Ok(ManifestStats {
        documents: docs.len(),
        cells: cells.into_values().collect(),
        durations,
    })
}
