//! Word production times and source-to-target latency statistics.
//!
//! A re-translating system's word is *finalized* at the first event after
//! which that word and every word before it never change again. Latency of a
//! link is the target production time minus the source word's start time.

use serde::{Deserialize, Serialize};

use crate::aligner::{compose, AlignmentLink, AlignmentSet};
use crate::error::{Error, Result};
use crate::ingest::{IncrementalLog, TimedTranscript, Tokenizer, Track};

pub const DEFAULT_PERCENTILES: [f64; 3] = [50.0, 90.0, 99.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalizationRecord {
    pub index: usize,
    pub word: String,
    pub time: f64,
}

/// Finalization time of every word of the log's final output.
pub fn finalization_times(
    log: &IncrementalLog,
    tokenizer: &Tokenizer,
) -> Result<Vec<FinalizationRecord>> {
    if log.events.is_empty() {
        return Err(Error::EmptyLog);
    }
    let snapshots: Vec<Vec<String>> = log
        .events
        .iter()
        .map(|e| tokenizer.tokenize(&e.text))
        .collect();
    let last = snapshots.last().expect("nonempty");
    // Length of the prefix each snapshot shares with the final output.
    let common: Vec<usize> = snapshots
        .iter()
        .map(|s| s.iter().zip(last).take_while(|(a, b)| a == b).count())
        .collect();
    // stable[k] = min over events k.. of the shared prefix; nondecreasing in k.
    let mut stable = common.clone();
    for k in (0..stable.len().saturating_sub(1)).rev() {
        stable[k] = stable[k].min(stable[k + 1]);
    }
    let mut out = Vec::with_capacity(last.len());
    let mut k = 0;
    for (w, word) in last.iter().enumerate() {
        while stable[k] < w + 1 {
            k += 1;
        }
        out.push(FinalizationRecord {
            index: w,
            word: word.clone(),
            time: log.events[k].time,
        });
    }
    Ok(out)
}

/// The final output as a timed transcript whose words start and end at
/// their finalization times.
pub fn finalized_transcript(
    log: &IncrementalLog,
    tokenizer: &Tokenizer,
    language: &str,
) -> Result<TimedTranscript> {
    let records = finalization_times(log, tokenizer)?;
    TimedTranscript::from_words(
        log.doc_id.clone(),
        Track::Mt,
        language,
        records.iter().map(|r| (r.word.as_str(), r.time, r.time)),
    )
}

/// Production time of a transcript word: its start timestamp.
pub fn word_time(transcript: &TimedTranscript, index: usize) -> Result<f64> {
    transcript
        .words
        .get(index)
        .map(|w| w.start)
        .ok_or(Error::IndexOutOfRange {
            index,
            len: transcript.len(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub link: AlignmentLink,
    pub src_time: f64,
    pub tgt_time: f64,
    pub latency: f64,
}

/// One sample per link; a source word with several links yields several samples.
pub fn link_latencies(
    links: &AlignmentSet,
    src_times: &[f64],
    tgt_times: &[f64],
) -> Result<Vec<LatencySample>> {
    links
        .links()
        .map(|link| {
            let src_time = *src_times.get(link.src).ok_or(Error::MissingTime {
                side: "source",
                index: link.src,
            })?;
            let tgt_time = *tgt_times.get(link.tgt).ok_or(Error::MissingTime {
                side: "target",
                index: link.tgt,
            })?;
            Ok(LatencySample {
                link,
                src_time,
                tgt_time,
                latency: tgt_time - src_time,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentile {
    pub pct: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    #[serde(skip)]
    pub samples: Vec<LatencySample>,
    pub count: usize,
    pub avg: f64,
    pub std: f64,
    pub percentiles: Vec<Percentile>,
    /// Share of source words with at least one link, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aligned_fraction: Option<f64>,
}

impl LatencyReport {
    pub fn percentile(&self, pct: f64) -> Option<f64> {
        self.percentiles
            .iter()
            .find(|p| p.pct == pct)
            .map(|p| p.value)
    }

    /// Records the share of `source_len` words that have a sample.
    pub fn with_coverage(mut self, linked_sources: usize, source_len: usize) -> Self {
        self.aligned_fraction = (source_len > 0).then(|| linked_sources as f64 / source_len as f64);
        self
    }
}

/// Nearest-rank percentile of ascending `sorted`: the `ceil(p/100 · n)`-th value.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct * n as f64) / 100.0).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn summarize(samples: &[LatencySample]) -> Result<LatencyReport> {
    summarize_with(samples, &DEFAULT_PERCENTILES)
}

/// Mean, population standard deviation and nearest-rank percentiles.
pub fn summarize_with(samples: &[LatencySample], percentiles: &[f64]) -> Result<LatencyReport> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(p) = percentiles.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
        return Err(Error::InvalidArgument(format!(
            "percentile {p} outside (0, 100]"
        )));
    }
    let n = samples.len() as f64;
    let avg = samples.iter().map(|s| s.latency).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|s| (s.latency - avg).powi(2))
        .sum::<f64>()
        / n;
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.latency).collect();
    sorted.sort_by(f64::total_cmp);
    let mut pcts: Vec<f64> = percentiles.to_vec();
    pcts.sort_by(f64::total_cmp);
    pcts.dedup();
    Ok(LatencyReport {
        samples: samples.to_vec(),
        count: samples.len(),
        avg,
        std: var.sqrt(),
        percentiles: pcts
            .into_iter()
            .map(|pct| Percentile {
                pct,
                value: nearest_rank(&sorted, pct),
            })
            .collect(),
        aligned_fraction: None,
    })
}

/// How the source of a relay (source → interpreter → MT) is linked to the
/// final target.
#[derive(Debug, Clone, Copy)]
pub enum RelayPath<'a> {
    /// Compose source→middle and middle→target alignments.
    Compose {
        src_mid: &'a AlignmentSet,
        mid_tgt: &'a AlignmentSet,
    },
    /// Use a precomputed source→target alignment.
    Direct { src_tgt: &'a AlignmentSet },
}

fn check_doc(expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::DocMismatch {
            expected: expected.to_owned(),
            found: found.to_owned(),
        });
    }
    Ok(())
}

/// Latency samples from source words to finalized relay output words.
pub fn relay_samples(
    src: &TimedTranscript,
    mid: &TimedTranscript,
    tgt_final: &[FinalizationRecord],
    path: RelayPath<'_>,
) -> Result<Vec<LatencySample>> {
    let links = match path {
        RelayPath::Compose { src_mid, mid_tgt } => {
            check_doc(&src_mid.docs.source, &src.doc_id)?;
            check_doc(&src_mid.docs.target, &mid.doc_id)?;
            compose(src_mid, mid_tgt)?
        }
        RelayPath::Direct { src_tgt } => {
            check_doc(&src_tgt.docs.source, &src.doc_id)?;
            src_tgt.clone()
        }
    };
    let tgt_times: Vec<f64> = tgt_final.iter().map(|r| r.time).collect();
    link_latencies(&links, &src.start_times(), &tgt_times)
}

pub fn relay_latency(
    src: &TimedTranscript,
    mid: &TimedTranscript,
    tgt_final: &[FinalizationRecord],
    path: RelayPath<'_>,
) -> Result<LatencyReport> {
    summarize(&relay_samples(src, mid, tgt_final, path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligner::{Direction, DocPair};
    use crate::ingest::LogEvent;

    fn log(events: &[(f64, &str)]) -> IncrementalLog {
        IncrementalLog::new(
            "d",
            events
                .iter()
                .map(|&(time, text)| LogEvent {
                    time,
                    text: text.into(),
                })
                .collect(),
            None,
        )
        .unwrap()
    }

    fn times(records: &[FinalizationRecord]) -> Vec<(String, f64)> {
        records.iter().map(|r| (r.word.clone(), r.time)).collect()
    }

    #[test]
    fn finalization_examples() {
        let tok = Tokenizer::new();
        let r = finalization_times(&log(&[(1.0, "a"), (2.0, "a b"), (3.0, "a c")]), &tok).unwrap();
        assert_eq!(times(&r), vec![("a".into(), 1.0), ("c".into(), 3.0)]);
        let r = finalization_times(&log(&[(1.0, "a"), (2.0, "a b")]), &tok).unwrap();
        assert_eq!(times(&r), vec![("a".into(), 1.0), ("b".into(), 2.0)]);
        let r = finalization_times(&log(&[(4.0, "x y")]), &tok).unwrap();
        assert_eq!(times(&r), vec![("x".into(), 4.0), ("y".into(), 4.0)]);
    }

    #[test]
    fn flicker_in_prefix_delays_later_words() {
        let tok = Tokenizer::new();
        let r = finalization_times(
            &log(&[(1.0, "a b"), (2.0, "z b"), (3.0, "a b c"), (4.0, "a b c d")]),
            &tok,
        )
        .unwrap();
        assert_eq!(
            times(&r),
            vec![
                ("a".into(), 3.0),
                ("b".into(), 3.0),
                ("c".into(), 3.0),
                ("d".into(), 4.0)
            ]
        );
    }

    #[test]
    fn finalized_transcript_is_timed() {
        let t = finalized_transcript(&log(&[(1.0, "a"), (2.0, "a b")]), &Tokenizer::new(), "cs")
            .unwrap();
        assert_eq!(t.track, Track::Mt);
        assert_eq!(t.start_times(), vec![1.0, 2.0]);
    }

    #[test]
    fn word_time_examples() {
        let t = TimedTranscript::from_words("d", Track::Source, "en", [("a", 3.21, 3.5)]).unwrap();
        assert_eq!(word_time(&t, 0).unwrap(), 3.21);
        assert!(matches!(
            word_time(&t, 1),
            Err(Error::IndexOutOfRange { index: 1, len: 1 })
        ));
    }

    #[test]
    fn link_latency_examples() {
        let links = AlignmentSet::new(
            DocPair::same("d"),
            Direction::Pruned,
            [AlignmentLink::new(0, 0)],
        );
        let s = link_latencies(&links, &[10.0], &[13.2]).unwrap();
        assert!((s[0].latency - 3.2).abs() < 1e-12);
        let s = link_latencies(&links, &[4.0], &[4.0]).unwrap();
        assert_eq!(s[0].latency, 0.0);
        assert!(matches!(
            link_latencies(&links, &[1.0], &[]),
            Err(Error::MissingTime {
                side: "target",
                index: 0
            })
        ));
    }

    fn samples(values: &[f64]) -> Vec<LatencySample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| LatencySample {
                link: AlignmentLink::new(i, i),
                src_time: 0.0,
                tgt_time: v,
                latency: v,
            })
            .collect()
    }

    #[test]
    fn summarize_examples() {
        let r = summarize(&samples(&[3.0, 3.0, 3.0])).unwrap();
        assert_eq!((r.avg, r.std), (3.0, 0.0));
        assert_eq!(r.percentile(50.0), Some(3.0));
        assert_eq!(r.percentile(99.0), Some(3.0));

        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        let r = summarize(&samples(&hundred)).unwrap();
        assert_eq!(r.percentile(50.0), Some(50.0));
        assert_eq!(r.percentile(90.0), Some(90.0));
        assert_eq!(r.percentile(99.0), Some(99.0));

        assert!(matches!(summarize(&[]), Err(Error::EmptySamples)));
        assert!(summarize_with(&samples(&[1.0]), &[0.0]).is_err());
    }

    #[test]
    fn relay_chain() {
        let src =
            TimedTranscript::from_words("en", Track::Source, "en", [("a", 0.0, 0.2)]).unwrap();
        let mid = TimedTranscript::from_words(
            "de",
            Track::Interpreter,
            "de",
            [("x", 1.0, 1.2), ("y", 2.0, 2.2)],
        )
        .unwrap();
        let fin: Vec<FinalizationRecord> = (0..3)
            .map(|i| FinalizationRecord {
                index: i,
                word: "w".into(),
                time: if i == 2 { 10.0 } else { 5.0 },
            })
            .collect();
        let a = AlignmentSet::new(
            DocPair::new("en", "de"),
            Direction::Pruned,
            [AlignmentLink::new(0, 1)],
        );
        let b = AlignmentSet::new(
            DocPair::new("de", "cs"),
            Direction::Pruned,
            [AlignmentLink::new(1, 2)],
        );
        let r = relay_latency(
            &src,
            &mid,
            &fin,
            RelayPath::Compose {
                src_mid: &a,
                mid_tgt: &b,
            },
        )
        .unwrap();
        assert_eq!((r.count, r.avg), (1, 10.0));

        let broken = AlignmentSet::new(
            DocPair::new("de", "cs"),
            Direction::Pruned,
            [AlignmentLink::new(0, 2)],
        );
        assert!(matches!(
            relay_latency(
                &src,
                &mid,
                &fin,
                RelayPath::Compose {
                    src_mid: &a,
                    mid_tgt: &broken
                }
            ),
            Err(Error::EmptySamples)
        ));

        let direct = AlignmentSet::new(
            DocPair::new("en", "cs"),
            Direction::Pruned,
            [AlignmentLink::new(0, 0)],
        );
        let r = relay_latency(&src, &mid, &fin, RelayPath::Direct { src_tgt: &direct }).unwrap();
        assert_eq!(r.avg, 5.0);

        let wrong = AlignmentSet::new(DocPair::new("fr", "de"), Direction::Pruned, []);
        assert!(matches!(
            relay_samples(
                &src,
                &mid,
                &fin,
                RelayPath::Compose {
                    src_mid: &wrong,
                    mid_tgt: &b
                }
            ),
            Err(Error::DocMismatch { .. })
        ));
    }
}
