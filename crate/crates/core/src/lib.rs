//! Toolkit for discourse-new event detection in narratives.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] parses dependency-parsed narratives (CoNLL-U) and the
//!   line-delimited corpus and gold-annotation records.
//! * [`extract`] turns each sentence's dependency tree into
//!   (subject, predicate, object) event candidates.
//! * [`reduce`] caps a sentence's candidate list by clustering the rendered
//!   triplets on normalized edit distance.
//! * [`baselines`] holds the rule-based candidate selectors and token taggers.
//! * [`metrics`] scores predictions, computes inter-annotator agreement and
//!   summarises an annotated corpus.
//! * [`evaluate`] turns baseline output into gold-format predictions and
//!   scores them against gold.
//! * [`annotation`] runs the annotation workflow itself: batches, sessions
//!   backed by an append-only log, adjudication and training-data export.

pub mod annotation;
pub mod baselines;
pub mod corpus;
pub mod evaluate;
pub mod extract;
pub mod jsonl;
pub mod metrics;
pub mod reduce;
mod rng;

pub use corpus::{Corpus, GoldIndex, GoldRecord, Narrative, Sentence, SentenceKey, Split, TextSpan, Token};
pub use extract::{ArgumentSpan, EventCandidate};
