use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    #[serde(rename = "t")]
    pub time: f64,
    pub text: String,
}

/// Time-stamped snapshots of a re-translating system's full output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalLog {
    pub doc_id: String,
    pub events: Vec<LogEvent>,
    pub session_end: f64,
}

impl IncrementalLog {
    /// Validates events and attaches the session end.
    ///
    /// When `session_end` is `None` it defaults to the last event time.
    pub fn new(
        doc_id: impl Into<String>,
        events: Vec<LogEvent>,
        session_end: Option<f64>,
    ) -> Result<Self> {
        let last = match events.last() {
            Some(e) => e.time,
            None => return Err(Error::EmptyLog),
        };
        for (i, e) in events.iter().enumerate() {
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::NegativeTime {
                    line: i + 1,
                    value: e.time,
                });
            }
            if i > 0 && e.time <= events[i - 1].time {
                return Err(Error::NonIncreasingEventTime {
                    index: i,
                    previous: events[i - 1].time,
                    found: e.time,
                });
            }
        }
        let session_end = session_end.unwrap_or(last);
        if !session_end.is_finite() || session_end < last {
            return Err(Error::InvalidArgument(format!(
                "session end {session_end} precedes last event at {last}"
            )));
        }
        let events = events
            .into_iter()
            .map(|e| LogEvent {
                time: e.time,
                text: e.text.nfc().collect(),
            })
            .collect();
        Ok(Self {
            doc_id: doc_id.into(),
            events,
            session_end,
        })
    }

    /// Parses line-delimited `{"t": .., "text": ..}` records.
    ///
    /// A trailing record with empty text marks the session end; an explicit
    /// `session_end` takes precedence over it.
    pub fn parse_jsonl(doc_id: &str, input: &str, session_end: Option<f64>) -> Result<Self> {
        let mut events = Vec::new();
        for (n, raw) in input.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let ev: LogEvent =
                serde_json::from_str(raw).map_err(|e| Error::malformed(n + 1, e.to_string()))?;
            events.push(ev);
        }
        let mut marker = None;
        if events.len() > 1 && events.last().is_some_and(|e| e.text.is_empty()) {
            marker = events.pop().map(|e| e.time);
        }
        if let (Some(m), Some(last)) = (marker, events.last()) {
            if m < last.time {
                return Err(Error::NonIncreasingEventTime {
                    index: events.len(),
                    previous: last.time,
                    found: m,
                });
            }
        }
        Self::new(doc_id, events, session_end.or(marker))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log event serializes"));
            out.push('\n');
        }
        let last = self.events.last().map(|e| e.time).unwrap_or(0.0);
        if self.session_end > last {
            let marker = LogEvent {
                time: self.session_end,
                text: String::new(),
            };
            out.push_str(&serde_json::to_string(&marker).expect("log event serializes"));
            out.push('\n');
        }
        out
    }

    /// Text of the last event, which defines the final output.
    pub fn final_text(&self) -> &str {
        self.events.last().map(|e| e.text.as_str()).unwrap_or("")
    }
}

/// Reads an incremental log; the document id is the file stem.
pub fn parse_incremental_log(
    path: impl AsRef<Path>,
    session_end: Option<f64>,
) -> Result<IncrementalLog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    IncrementalLog::parse_jsonl(&doc_id, &text, session_end)
}
