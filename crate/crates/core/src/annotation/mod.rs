//! The annotation workflow.
//!
//! Annotators work through a narrative one sentence at a time. Every state
//! change is a [`LogRecord`] appended to an append-only line log; the live
//! [`State`] is whatever replaying that log produces.

mod adjudicate;
mod batches;
mod export;
mod iaa;
mod log;
mod service;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::TextSpan;

pub use adjudicate::{adjudicate_gold, AdjudicationPolicy, SentenceAnnotations};
pub use batches::assemble_batches;
pub use export::{
    export_training_examples, gold_events, project_tags, ExportRecord, ExportSetting, Label, SelectionExample,
    TagSource, TaggingExample, DEFAULT_TOKEN_BUDGET,
};
pub use iaa::{monitor_overlap_iaa, IaaReport, IaaStatus, IaaThresholds};
pub use log::{EventLog, LogRecord, State};
pub use service::{AnnotationService, CandidateView, CurrentUnit, SessionTarget, Submission, Unit};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown narrative `{0}`")]
    UnknownNarrative(String),
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
    #[error("annotator `{annotator}` has no remaining narrative in batch `{batch}`")]
    NotAssigned { annotator: String, batch: String },
    #[error("invalid annotation: {0}")]
    Validation(String),
    #[error("expected position {expected}, got {got}")]
    Sequencing { expected: usize, got: usize },
    #[error("narrative `{0}` is already complete")]
    Complete(String),
    #[error("cannot assemble batches: {0}")]
    Assembly(String),
    #[error("annotation log unavailable: {0}")]
    Storage(String),
    #[error("corrupt annotation log at record {record}: {message}")]
    Replay { record: usize, message: String },
}

/// One annotator's decision for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sentence_position: usize,
    pub selected_candidate_ids: BTreeSet<String>,
    pub added_spans: Vec<TextSpan>,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub annotator_id: String,
    pub narrative_id: String,
    /// Next sentence position awaiting a decision.
    pub cursor: usize,
    pub submitted: Vec<Annotation>,
}

/// A unit of work: one narrative every annotator labels, plus narratives
/// dealt out to single annotators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub id: String,
    /// Annotator -> singly-assigned narratives. Every annotator of the batch
    /// has an entry, possibly empty.
    pub assignments: BTreeMap<String, Vec<String>>,
    pub overlap_narrative: String,
    #[serde(default)]
    pub qualification: bool,
}

impl Batch {
    /// A one-narrative batch labelled by every annotator, used to vet annotators.
    pub fn qualification(id: impl Into<String>, narrative_id: impl Into<String>, annotators: &[String]) -> Self {
        Self {
            id: id.into(),
            assignments: annotators.iter().map(|a| (a.clone(), Vec::new())).collect(),
            overlap_narrative: narrative_id.into(),
            qualification: true,
        }
    }

    pub fn annotators(&self) -> impl Iterator<Item = &String> {
        self.assignments.keys()
    }

    /// Narratives an annotator works on in this batch, overlap first.
    pub fn narratives_for(&self, annotator: &str) -> Option<Vec<&str>> {
        let assigned = self.assignments.get(annotator)?;
        let mut out = vec![self.overlap_narrative.as_str()];
        out.extend(assigned.iter().map(String::as_str));
        Some(out)
    }
}
