//! Word alignment of whole documents: EM training in both directions,
//! Viterbi decoding, intersection and removal of time-regressive links.

mod links;
mod model;

use serde::{Deserialize, Serialize};

pub use links::{
    compose, intersect, prune_time_regressive, AlignmentLink, AlignmentSet, Direction, DocPair,
    PruneRule,
};
pub use model::{train_em, AlignModel, EmConfig, Trained, TranslationTable, NULL_TOKEN};

use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{trim_lemma, ParallelCorpus, TimedTranscript};

/// Whether time-regressive links are dropped before or after intersecting.
/// Both orders give the same links; the stage only changes which
/// intermediate sets are pruned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneStage {
    BeforeIntersection,
    #[default]
    AfterIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignerConfig {
    pub em: EmConfig,
    pub trim_length: usize,
    pub lowercase: bool,
    pub prune_rule: PruneRule,
    pub prune_stage: PruneStage,
}

impl Default for AlignerConfig {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            trim_length: 5,
            lowercase: true,
            prune_rule: PruneRule::StartStart,
            prune_stage: PruneStage::AfterIntersection,
        }
    }
}

impl AlignerConfig {
    /// Case-folds and trims tokens the way the aligner sees them.
    pub fn prepare<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if self.lowercase {
                    trim_lemma(&t.to_lowercase(), self.trim_length)
                } else {
                    trim_lemma(t, self.trim_length)
                }
            })
            .collect()
    }
}

/// Forward (source→target) and backward (target→source) models.
#[derive(Debug, Clone)]
pub struct BidirectionalModel {
    pub forward: Trained,
    pub backward: Trained,
    config: AlignerConfig,
}

/// Trains both directions on the documents, each treated as one sentence
/// pair, followed by any extra sentence-aligned data.
pub fn train_bidirectional(
    documents: &[(Vec<String>, Vec<String>)],
    extra: Option<&ParallelCorpus>,
    config: &AlignerConfig,
) -> Result<BidirectionalModel> {
    let mut pairs: Vec<(Vec<String>, Vec<String>)> = documents
        .iter()
        .map(|(s, t)| (config.prepare(s), config.prepare(t)))
        .collect();
    if let Some(extra) = extra {
        pairs.extend(
            extra
                .pairs()
                .iter()
                .map(|p| (config.prepare(&p.source), config.prepare(&p.target))),
        );
    }
    let (corpus, _) = ParallelCorpus::from_lossy(pairs);
    let forward = train_em(&corpus, &config.em)?;
    let backward = train_em(&corpus.swapped(), &config.em)?;
    Ok(BidirectionalModel {
        forward,
        backward,
        config: config.clone(),
    })
}

/// Forward, backward (in forward orientation) and intersected links.
#[derive(Debug, Clone)]
pub struct DocumentAlignment {
    pub forward: AlignmentSet,
    pub backward: AlignmentSet,
    pub intersection: AlignmentSet,
}

impl BidirectionalModel {
    /// Rebuilds a model from saved translation tables.
    pub fn from_tables(
        forward: TranslationTable,
        backward: TranslationTable,
        config: AlignerConfig,
    ) -> Self {
        let wrap = |table| Trained {
            table,
            log_likelihood: Vec::new(),
        };
        Self {
            forward: wrap(forward),
            backward: wrap(backward),
            config,
        }
    }

    pub fn config(&self) -> &AlignerConfig {
        &self.config
    }

    /// Writes `forward.ttable`, `backward.ttable` and `aligner.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = serde_json::to_string_pretty(&self.config)? + "\n";
        for (name, text) in [
            ("forward.ttable", self.forward.table.to_tsv()),
            ("backward.ttable", self.backward.table.to_tsv()),
            ("aligner.json", config),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let forward = TranslationTable::parse_tsv(&read("forward.ttable")?)?;
        let backward = TranslationTable::parse_tsv(&read("backward.ttable")?)?;
        let config = serde_json::from_str(&read("aligner.json")?)?;
        Ok(Self::from_tables(forward, backward, config))
    }

    pub fn align<S: AsRef<str>>(&self, src: &[S], tgt: &[S], docs: DocPair) -> DocumentAlignment {
        let src = self.config.prepare(src);
        let tgt = self.config.prepare(tgt);
        let forward = self.forward.table.align(&src, &tgt, docs.clone());
        let mut backward = self
            .backward
            .table
            .align(
                &tgt,
                &src,
                DocPair::new(docs.target.clone(), docs.source.clone()),
            )
            .inverted();
        backward.direction = Direction::Backward;
        let intersection = intersect(&forward, &backward).expect("same document pair");
        DocumentAlignment {
            forward,
            backward,
            intersection,
        }
    }

    /// Aligns two timed transcripts and removes time-regressive links at the
    /// configured stage. Returns the final (pruned) set.
    pub fn align_timed(
        &self,
        src: &TimedTranscript,
        tgt: &TimedTranscript,
    ) -> Result<AlignmentSet> {
        let docs = DocPair::new(src.doc_id.clone(), tgt.doc_id.clone());
        let a = self.align(&src.surfaces(), &tgt.surfaces(), docs);
        let rule = self.config.prune_rule;
        match self.config.prune_stage {
            PruneStage::AfterIntersection => prune_time_regressive(&a.intersection, src, tgt, rule),
            PruneStage::BeforeIntersection => {
                let f = prune_time_regressive(&a.forward, src, tgt, rule)?;
                let b = prune_time_regressive(&a.backward, src, tgt, rule)?;
                let mut out = intersect(&f, &b)?;
                out.direction = Direction::Pruned;
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SentencePair, Track};

    #[test]
    fn save_and_load() {
        let docs = vec![(
            vec!["a".to_string(), "b".into()],
            vec!["x".to_string(), "y".into()],
        )];
        let model = train_bidirectional(&docs, None, &AlignerConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let loaded = BidirectionalModel::load(dir.path()).unwrap();
        let (s, t) = &docs[0];
        let d = DocPair::same("d");
        assert_eq!(
            model.align(s, t, d.clone()).intersection,
            loaded.align(s, t, d).intersection
        );
        assert_eq!(loaded.config(), model.config());
    }

    #[test]
    fn prune_stage_does_not_change_links() {
        let src_words = ["the", "house", "is", "small", "the", "house"];
        let tgt_words = ["das", "haus", "ist", "klein", "das", "haus"];
        let docs: Vec<(Vec<String>, Vec<String>)> = vec![(
            src_words.iter().map(|s| s.to_string()).collect(),
            tgt_words.iter().map(|s| s.to_string()).collect(),
        )];
        let extra = ParallelCorpus::new(vec![
            SentencePair {
                source: vec!["the".into(), "house".into()],
                target: vec!["das".into(), "haus".into()],
            },
            SentencePair {
                source: vec!["small".into()],
                target: vec!["klein".into()],
            },
            SentencePair {
                source: vec!["is".into(), "small".into()],
                target: vec!["ist".into(), "klein".into()],
            },
        ])
        .unwrap();
        let src = TimedTranscript::from_words(
            "d",
            Track::Source,
            "en",
            src_words
                .iter()
                .enumerate()
                .map(|(i, w)| (*w, i as f64, i as f64 + 0.5)),
        )
        .unwrap();
        // target shifted so the first two words are produced too early
        let tgt = TimedTranscript::from_words(
            "d",
            Track::Interpreter,
            "de",
            tgt_words
                .iter()
                .enumerate()
                .map(|(i, w)| (*w, (i as f64 + 1.5).max(3.0) - 2.0, 10.0)),
        )
        .unwrap();
        let mut cfg = AlignerConfig::default();
        cfg.em.iterations = 8;
        let model = train_bidirectional(&docs, Some(&extra), &cfg).unwrap();
        let after = model.align_timed(&src, &tgt).unwrap();
        cfg.prune_stage = PruneStage::BeforeIntersection;
        let model2 = train_bidirectional(&docs, Some(&extra), &cfg).unwrap();
        let before = model2.align_timed(&src, &tgt).unwrap();
        assert_eq!(
            after.links().collect::<Vec<_>>(),
            before.links().collect::<Vec<_>>()
        );
        assert!(!after.is_empty());
        for l in after.links() {
            assert!(tgt.words[l.tgt].start >= src.words[l.src].start);
        }
    }

    #[test]
    fn prepare_trims_and_folds() {
        let cfg = AlignerConfig::default();
        assert_eq!(cfg.prepare(&["Parliament", "EU"]), vec!["parli", "eu"]);
    }
}
