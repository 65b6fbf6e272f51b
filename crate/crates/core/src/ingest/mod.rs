//! Parsing and validation of every on-disk input: timed transcripts,
//! incremental MT logs, corpus manifests and parallel corpora.

mod corpus;
mod log;
mod manifest;
mod tokenize;
mod transcript;

pub use corpus::{read_parallel_corpus, write_side, ParallelCorpus, SentencePair};
pub use log::{parse_incremental_log, IncrementalLog, LogEvent};
pub use manifest::{
    parse_manifest, validate_manifest, CountUnit, Delivery, DocumentManifest, ManifestStats,
    TrackEntry, Version, VersionStats,
};
pub use tokenize::{default_symbols, strip_symbols, tokenize, trim_lemma, Tokenizer};
pub use transcript::{parse_timed_transcript, TimedTranscript, Track, WordToken, TIME_EPS};
