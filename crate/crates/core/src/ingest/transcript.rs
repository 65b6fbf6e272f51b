use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Tolerance used when comparing timestamps.
pub const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Source,
    Interpreter,
    Mt,
}

impl Track {
    pub fn as_str(self) -> &'static str {
        match self {
            Track::Source => "src",
            Track::Interpreter => "int",
            Track::Mt => "mt",
        }
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "src" | "source" => Ok(Track::Source),
            "int" | "interpreter" | "interpreting" => Ok(Track::Interpreter),
            "mt" => Ok(Track::Mt),
            other => Err(Error::InvalidArgument(format!("unknown track `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordToken {
    pub surface: String,
    pub start: f64,
    pub end: f64,
    pub index: usize,
}

/// Word-timestamped transcript of one document track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedTranscript {
    pub doc_id: String,
    pub track: Track,
    pub language: String,
    pub words: Vec<WordToken>,
}

impl TimedTranscript {
    /// Builds a transcript from `(surface, start, end)` triples, validating
    /// every invariant and numbering words from zero.
    pub fn from_words<S: AsRef<str>>(
        doc_id: impl Into<String>,
        track: Track,
        language: impl Into<String>,
        words: impl IntoIterator<Item = (S, f64, f64)>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        let mut previous: Option<f64> = None;
        for (i, (surface, start, end)) in words.into_iter().enumerate() {
            let line = i + 1;
            let surface: String = surface.as_ref().trim().nfc().collect();
            if surface.is_empty() {
                return Err(Error::malformed(line, "empty surface"));
            }
            check_time(line, start)?;
            check_time(line, end)?;
            if end < start - TIME_EPS {
                return Err(Error::InvalidSpan { line, start, end });
            }
            if let Some(prev) = previous {
                if start < prev - TIME_EPS {
                    return Err(Error::NonMonotonicTime {
                        line,
                        previous: prev,
                        found: start,
                    });
                }
            }
            previous = Some(start);
            out.push(WordToken {
                surface,
                start,
                end,
                index: i,
            });
        }
        Ok(Self {
            doc_id: doc_id.into(),
            track,
            language: language.into(),
            words: out,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.words.iter().map(|w| w.surface.clone()).collect()
    }

    pub fn start_times(&self) -> Vec<f64> {
        self.words.iter().map(|w| w.start).collect()
    }

    /// Parses the TSV format
    /// `doc_id<TAB>track<TAB>index<TAB>surface<TAB>start_s<TAB>end_s`.
    ///
    /// Blank lines and lines starting with `#` are skipped. The index column
    /// is informational; words are renumbered in file order.
    pub fn parse_tsv(input: &str, track: Track, language: &str) -> Result<Self> {
        let mut doc_id: Option<String> = None;
        let mut rows = Vec::new();
        let mut line_numbers = Vec::new();
        for (n, raw) in input.lines().enumerate() {
            let line = n + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() != 6 {
                return Err(Error::malformed(
                    line,
                    format!("expected 6 tab-separated columns, found {}", cols.len()),
                ));
            }
            match &doc_id {
                None => doc_id = Some(cols[0].to_owned()),
                Some(d) if d != cols[0] => {
                    return Err(Error::malformed(
                        line,
                        format!("document `{}` differs from `{d}`", cols[0]),
                    ))
                }
                Some(_) => {}
            }
            let line_track: Track = cols[1]
                .parse()
                .map_err(|_| Error::malformed(line, format!("unknown track `{}`", cols[1])))?;
            if line_track != track {
                return Err(Error::malformed(
                    line,
                    format!("track `{line_track}` where `{track}` was expected"),
                ));
            }
            cols[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::malformed(line, format!("bad index `{}`", cols[2])))?;
            let start = parse_seconds(line, cols[4])?;
            let end = parse_seconds(line, cols[5])?;
            rows.push((cols[3].to_owned(), start, end));
            line_numbers.push(line);
        }
        // Re-map errors from row numbers back to file line numbers.
        Self::from_words(doc_id.unwrap_or_default(), track, language, rows).map_err(|e| {
            let fix = |row: usize| line_numbers.get(row - 1).copied().unwrap_or(row);
            match e {
                Error::MalformedLine { line, reason } => Error::MalformedLine {
                    line: fix(line),
                    reason,
                },
                Error::NonMonotonicTime {
                    line,
                    previous,
                    found,
                } => Error::NonMonotonicTime {
                    line: fix(line),
                    previous,
                    found,
                },
                Error::NegativeTime { line, value } => Error::NegativeTime {
                    line: fix(line),
                    value,
                },
                Error::InvalidSpan { line, start, end } => Error::InvalidSpan {
                    line: fix(line),
                    start,
                    end,
                },
                other => other,
            }
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                self.doc_id, self.track, w.index, w.surface, w.start, w.end
            ));
        }
        out
    }
}

fn check_time(line: usize, value: f64) -> Result<()> {
    if !value.is_finite() || value < -TIME_EPS {
        return Err(Error::NegativeTime { line, value });
    }
    Ok(())
}

fn parse_seconds(line: usize, field: &str) -> Result<f64> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::malformed(line, format!("bad time `{field}`")))?;
    check_time(line, value)?;
    Ok(value)
}

/// Reads and validates a timed transcript TSV file.
pub fn parse_timed_transcript(
    path: impl AsRef<Path>,
    track: Track,
    language: &str,
) -> Result<TimedTranscript> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TimedTranscript::parse_tsv(&text, track, language)
}
