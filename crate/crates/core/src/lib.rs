//! Evaluation toolkit for simultaneous speech translation pipelines.
//!
//! Measures how long after a source word its translation is produced (by a
//! human interpreter or a re-translating MT system), how much the output is
//! compressed, how common its vocabulary is, and how it scores against
//! references.
//!
//! * [`ingest`] reads timed transcripts, incremental MT logs, manifests and
//!   parallel corpora.
//! * [`aligner`] trains EM word alignment over whole documents and prunes
//!   links that go back in time.
//! * [`latency`] computes finalization times and latency summaries.
//! * [`textmetrics`] measures syllable/character compression and log-rank
//!   vocabulary complexity.
//! * [`quality`] computes BLEU and aggregates human annotations.
//! * [`shortenfilter`] selects training pairs by subword length ratio.
//! * [`pipeline`] runs a full experiment from a config file and renders reports.

pub mod aligner;
pub mod error;
pub mod ingest;
pub mod latency;
pub mod pipeline;
pub mod quality;
pub mod shortenfilter;
pub mod textmetrics;

pub use error::{Error, Result};
