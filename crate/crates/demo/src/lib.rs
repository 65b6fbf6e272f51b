//! Browser bindings: finalization timeline of an incremental log, latency of
//! one aligned document, and BLEU. Each export takes text and returns JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lagmeter::aligner::{train_bidirectional, AlignerConfig, AlignmentSet, Direction, DocPair};
use lagmeter::ingest::{IncrementalLog, TimedTranscript, Tokenizer, Track};
use lagmeter::latency::{
    finalization_times, link_latencies, summarize_with, LatencyReport, DEFAULT_PERCENTILES,
};
use lagmeter::quality::{bleu, BleuConfig, BleuReport, Segmentation, Smoothing};

#[derive(Serialize)]
struct TimelineEvent {
    t: f64,
    tokens: Vec<String>,
    /// Leading tokens already identical to the final output.
    shared: usize,
}

#[derive(Serialize)]
struct TimedWord {
    index: usize,
    word: String,
    time: f64,
}

#[derive(Serialize)]
struct Timeline {
    events: Vec<TimelineEvent>,
    words: Vec<TimedWord>,
    session_end: f64,
}

pub fn timeline(log_jsonl: &str) -> Result<String, String> {
    let log = IncrementalLog::parse_jsonl("demo", log_jsonl, None).map_err(|e| e.to_string())?;
    let tok = Tokenizer::new();
    let words = finalization_times(&log, &tok).map_err(|e| e.to_string())?;
    let last = tok.tokenize(log.final_text());
    let events = log
        .events
        .iter()
        .map(|e| {
            let tokens = tok.tokenize(&e.text);
            let shared = tokens.iter().zip(&last).take_while(|(a, b)| a == b).count();
            TimelineEvent {
                t: e.time,
                tokens,
                shared,
            }
        })
        .collect();
    let out = Timeline {
        events,
        words: words
            .into_iter()
            .map(|w| TimedWord {
                index: w.index,
                word: w.word,
                time: w.time,
            })
            .collect(),
        session_end: log.session_end,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct LatencyOut {
    report: LatencyReport,
    links: String,
    samples: Vec<f64>,
}

fn parse_any_track(text: &str) -> Result<TimedTranscript, String> {
    let mut err = String::new();
    for track in [Track::Source, Track::Interpreter, Track::Mt] {
        match TimedTranscript::parse_tsv(text, track, "xx") {
            Ok(t) => return Ok(t),
            Err(e) => err = e.to_string(),
        }
    }
    Err(err)
}

/// With blank `pharaoh`, links come from an aligner trained on this one pair.
pub fn latency(src_tsv: &str, tgt_tsv: &str, pharaoh: &str) -> Result<String, String> {
    let src = parse_any_track(src_tsv).map_err(|e| format!("source: {e}"))?;
    let tgt = parse_any_track(tgt_tsv).map_err(|e| format!("target: {e}"))?;
    let links = if pharaoh.trim().is_empty() {
        let docs = vec![(src.surfaces(), tgt.surfaces())];
        let model = train_bidirectional(&docs, None, &AlignerConfig::default())
            .map_err(|e| e.to_string())?;
        model.align_timed(&src, &tgt).map_err(|e| e.to_string())?
    } else {
        let docs = DocPair::new(src.doc_id.clone(), tgt.doc_id.clone());
        AlignmentSet::parse_pharaoh(pharaoh.trim(), docs, Direction::Pruned)
            .map_err(|e| e.to_string())?
    };
    let samples = link_latencies(&links, &src.start_times(), &tgt.start_times())
        .map_err(|e| e.to_string())?;
    let report = summarize_with(&samples, &DEFAULT_PERCENTILES)
        .map_err(|e| e.to_string())?
        .with_coverage(links.linked_sources().len(), src.len());
    let out = LatencyOut {
        samples: samples.iter().map(|s| s.latency).collect(),
        links: links.to_pharaoh(),
        report,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BleuOut {
    agg: BleuReport,
    one: BleuReport,
}

/// One segment per non-empty line on each side.
pub fn bleu_scores(hyp: &str, reference: &str, smooth: bool) -> Result<String, String> {
    let tok = Tokenizer::new();
    let lines = |s: &str| -> Vec<Vec<String>> {
        s.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| tok.tokenize(l))
            .collect()
    };
    let (h, r) = (lines(hyp), lines(reference));
    let base = BleuConfig {
        smoothing: if smooth {
            Smoothing::AddOne
        } else {
            Smoothing::None
        },
        ..BleuConfig::default()
    };
    let run = |mode| bleu(&h, &r, &BleuConfig { mode, ..base }).map_err(|e| e.to_string());
    let out = BleuOut {
        agg: run(Segmentation::Agg)?,
        one: run(Segmentation::One)?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = finalizationTimeline)]
pub fn finalization_timeline_js(log_jsonl: &str) -> Result<String, JsError> {
    timeline(log_jsonl).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = latencySummary)]
pub fn latency_summary_js(src_tsv: &str, tgt_tsv: &str, pharaoh: &str) -> Result<String, JsError> {
    latency(src_tsv, tgt_tsv, pharaoh).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = bleuScore)]
pub fn bleu_score_js(hyp: &str, reference: &str, smooth: bool) -> Result<String, JsError> {
    bleu_scores(hyp, reference, smooth).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timeline_marks_revisions() {
        let log =
            "{\"t\":1,\"text\":\"a\"}\n{\"t\":2,\"text\":\"a x\"}\n{\"t\":3,\"text\":\"a b\"}\n";
        let v: serde_json::Value = serde_json::from_str(&timeline(log).unwrap()).unwrap();
        assert_eq!(v["words"][0]["time"], 1.0);
        assert_eq!(v["words"][1]["time"], 3.0);
        assert_eq!(v["events"][1]["shared"], 1);
        assert!(timeline("").is_err());
    }

    #[test]
    fn latency_from_links() {
        let src = "d\tsrc\t0\ta\t0.0\t0.5\nd\tsrc\t1\tb\t1.0\t1.5\n";
        let tgt = "d\tint\t0\tx\t2.0\t2.5\nd\tint\t1\ty\t4.0\t4.5\n";
        let v: serde_json::Value =
            serde_json::from_str(&latency(src, tgt, "0-0 1-1").unwrap()).unwrap();
        assert_eq!(v["report"]["avg"], 2.5);
        assert_eq!(v["samples"].as_array().unwrap().len(), 2);
        assert!(latency(src, tgt, "").is_ok());
        assert!(latency("junk", tgt, "").is_err());
    }

    #[test]
    fn bleu_identity() {
        let v: serde_json::Value = serde_json::from_str(
            &bleu_scores("the cat sat on the mat", "the cat sat on the mat", false).unwrap(),
        )
        .unwrap();
        assert_eq!(v["agg"]["score"], 100.0);
        assert_eq!(v["one"]["score"], 100.0);
    }
}
