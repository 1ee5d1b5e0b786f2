use std::collections::BTreeSet;
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    adjudicate_gold, assemble_batches, export_training_examples, monitor_overlap_iaa, AdjudicationPolicy, Annotation,
    Batch, EventLog, ExportRecord, ExportSetting, IaaReport, IaaThresholds, LogRecord, ServiceError, Session, State,
    TagSource,
};
use crate::corpus::{load_gold, Corpus, GoldRecord, TextSpan};
use crate::extract::CandidateIndex;

const DEFAULT_GUIDELINE_DIGEST: &str = "Tick every candidate that describes an event not mentioned earlier in the \
narrative. When a new event has no matching candidate, add it by marking the part of the sentence that conveys it. \
Submit with nothing ticked when the sentence only refers back to earlier events.";

/// What a new session is opened on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionTarget {
    Narrative(String),
    /// The annotator's next unfinished narrative of a batch, overlap first.
    Batch(String),
}

/// A decision for the current sentence as sent by a client.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Submission {
    pub position: usize,
    #[serde(default)]
    pub selected_candidate_ids: BTreeSet<String>,
    #[serde(default)]
    pub added_spans: Vec<TextSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateView {
    pub id: String,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurrentUnit {
    pub session_id: String,
    pub narrative_id: String,
    pub sentence_text: String,
    pub position: usize,
    /// Texts of the sentences already annotated, in order.
    pub context_sentences: Vec<String>,
    pub candidates: Vec<CandidateView>,
    pub guideline_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Unit {
    Sentence(CurrentUnit),
    Complete { session_id: String, narrative_id: String, complete: bool },
}

struct Inner {
    log: EventLog,
    state: State,
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

/// The annotation workflow over a fixed corpus and candidate lists.
///
/// All changes go through one lock: a record is appended durably, then
/// applied to the in-memory state, so readers only ever see acknowledged
/// records.
pub struct AnnotationService {
    corpus: Corpus,
    candidates: CandidateIndex,
    guideline_digest: String,
    thresholds: IaaThresholds,
    clock: Clock,
    inner: Mutex<Inner>,
}

fn system_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl AnnotationService {
    /// Builds the service, replaying any records already in `log`.
    /// `candidates` are the lists presented to annotators (normally reduced).
    pub fn open(corpus: Corpus, candidates: CandidateIndex, log: EventLog) -> Result<Self, ServiceError> {
        let state = State::replay(log.records())?;
        Ok(Self {
            corpus,
            candidates,
            guideline_digest: DEFAULT_GUIDELINE_DIGEST.to_string(),
            thresholds: IaaThresholds::default(),
            clock: Box::new(system_millis),
            inner: Mutex::new(Inner { log, state }),
        })
    }

    pub fn with_guideline_digest(mut self, digest: impl Into<String>) -> Self {
        self.guideline_digest = digest.into();
        self
    }

    pub fn with_thresholds(mut self, thresholds: IaaThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    /// Replaces the wall clock used for timestamps (milliseconds since the epoch).
    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn candidates(&self) -> &CandidateIndex {
        &self.candidates
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // State changes only after a successful append, so a panic elsewhere
        // cannot leave it half-updated.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Consistent copy of the current state.
    pub fn snapshot(&self) -> State {
        self.lock().state.clone()
    }

    pub fn log_records(&self) -> Vec<LogRecord> {
        self.lock().log.records().to_vec()
    }

    fn commit(inner: &mut Inner, record: LogRecord) -> Result<(), ServiceError> {
        let mut next = inner.state.clone();
        next.apply(&record).map_err(ServiceError::Validation)?;
        inner.log.append(record)?;
        inner.state = next;
        Ok(())
    }

    /// Opens a session, or returns the existing one for the same annotator
    /// and narrative. The flag tells whether a session was created.
    pub fn create_session(&self, annotator_id: &str, target: SessionTarget) -> Result<(Session, bool), ServiceError> {
        if annotator_id.trim().is_empty() {
            return Err(ServiceError::Validation("annotator id must not be empty".into()));
        }
        let mut inner = self.lock();
        let narrative_id = match target {
            SessionTarget::Narrative(id) => {
                if self.corpus.get(&id).is_none() {
                    return Err(ServiceError::UnknownNarrative(id));
                }
                id
            }
            SessionTarget::Batch(batch_id) => {
                let batch = inner.state.batch(&batch_id).ok_or_else(|| ServiceError::UnknownBatch(batch_id.clone()))?;
                let not_assigned =
                    || ServiceError::NotAssigned { annotator: annotator_id.to_string(), batch: batch_id.clone() };
                let narratives = batch.narratives_for(annotator_id).ok_or_else(not_assigned)?;
                narratives
                    .into_iter()
                    .find(|nid| {
                        let length = self.corpus.get(nid).map_or(0, |n| n.sentences.len());
                        inner.state.session_for(annotator_id, nid).is_none_or(|s| s.cursor < length)
                    })
                    .ok_or_else(not_assigned)?
                    .to_string()
            }
        };
        if let Some(existing) = inner.state.session_for(annotator_id, &narrative_id) {
            return Ok((existing.clone(), false));
        }
        let session_id = inner.state.next_session_id();
        let record = LogRecord::SessionCreated {
            session_id: session_id.clone(),
            annotator_id: annotator_id.to_string(),
            narrative_id,
            timestamp: (self.clock)(),
        };
        Self::commit(&mut inner, record)?;
        Ok((inner.state.session(&session_id).expect("just created").clone(), true))
    }

    pub fn session(&self, session_id: &str) -> Result<Session, ServiceError> {
        self.lock()
            .state
            .session(session_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))
    }

    /// The sentence awaiting a decision, with the sentences before it.
    pub fn current_unit(&self, session_id: &str) -> Result<Unit, ServiceError> {
        let session = self.session(session_id)?;
        let narrative = self
            .corpus
            .get(&session.narrative_id)
            .ok_or_else(|| ServiceError::UnknownNarrative(session.narrative_id.clone()))?;
        let Some(sentence) = narrative.sentences.get(session.cursor) else {
            return Ok(Unit::Complete { session_id: session.id, narrative_id: session.narrative_id, complete: true });
        };
        Ok(Unit::Sentence(CurrentUnit {
            session_id: session.id.clone(),
            narrative_id: session.narrative_id.clone(),
            sentence_text: sentence.text.clone(),
            position: sentence.position,
            context_sentences: narrative.sentences[..session.cursor].iter().map(|s| s.text.clone()).collect(),
            candidates: self
                .candidates
                .get(&sentence.key())
                .iter()
                .map(|c| CandidateView { id: c.id.clone(), rendered: c.rendered() })
                .collect(),
            guideline_digest: self.guideline_digest.clone(),
        }))
    }

    /// Validates and records a decision for the session's current sentence.
    /// Nothing is written when validation fails.
    pub fn submit(&self, session_id: &str, submission: Submission) -> Result<Session, ServiceError> {
        let mut inner = self.lock();
        let session =
            inner.state.session(session_id).ok_or_else(|| ServiceError::UnknownSession(session_id.to_string()))?;
        let narrative = self
            .corpus
            .get(&session.narrative_id)
            .ok_or_else(|| ServiceError::UnknownNarrative(session.narrative_id.clone()))?;
        if session.cursor >= narrative.sentences.len() {
            return Err(ServiceError::Complete(narrative.id.clone()));
        }
        if submission.position != session.cursor {
            return Err(ServiceError::Sequencing { expected: session.cursor, got: submission.position });
        }
        let sentence = &narrative.sentences[session.cursor];
        let presented = self.candidates.get(&sentence.key());
        for id in &submission.selected_candidate_ids {
            if !presented.iter().any(|c| &c.id == id) {
                return Err(ServiceError::Validation(format!(
                    "candidate `{id}` was not presented for sentence {}",
                    sentence.position
                )));
            }
        }
        for span in &submission.added_spans {
            if span.char_start >= span.char_end {
                return Err(ServiceError::Validation(format!("span {}..{} is empty", span.char_start, span.char_end)));
            }
            match sentence.slice(span.char_start, span.char_end) {
                Some(actual) if actual == span.text => {}
                actual => {
                    return Err(ServiceError::Validation(format!(
                        "span text `{}` does not match the sentence at {}..{} ({})",
                        span.text,
                        span.char_start,
                        span.char_end,
                        actual.map_or_else(|| "out of range".to_string(), |a| format!("`{a}`"))
                    )))
                }
            }
        }
        let record = LogRecord::AnnotationSubmitted {
            session_id: session_id.to_string(),
            annotation: Annotation {
                sentence_position: submission.position,
                selected_candidate_ids: submission.selected_candidate_ids,
                added_spans: submission.added_spans,
                timestamp: (self.clock)(),
            },
        };
        Self::commit(&mut inner, record)?;
        Ok(inner.state.session(session_id).expect("session exists").clone())
    }

    /// Registers a batch built elsewhere, e.g. a qualification batch.
    pub fn register_batch(&self, batch: Batch) -> Result<Batch, ServiceError> {
        let mut inner = self.lock();
        self.check_batch(&inner.state, &batch)?;
        Self::commit(&mut inner, LogRecord::BatchRegistered { batch: batch.clone() })?;
        Ok(batch)
    }

    fn check_batch(&self, state: &State, batch: &Batch) -> Result<(), ServiceError> {
        if state.batch(&batch.id).is_some() {
            return Err(ServiceError::Assembly(format!("batch `{}` already exists", batch.id)));
        }
        if batch.assignments.is_empty() {
            return Err(ServiceError::Assembly(format!("batch `{}` has no annotators", batch.id)));
        }
        for annotator in batch.annotators() {
            let mine = batch.narratives_for(annotator).expect("annotator of the batch");
            for nid in &mine {
                if self.corpus.get(nid).is_none() {
                    return Err(ServiceError::UnknownNarrative(nid.to_string()));
                }
            }
            let distinct: BTreeSet<&&str> = mine.iter().collect();
            let mut taken = distinct.len() != mine.len();
            for other in state.batches() {
                if let Some(theirs) = other.narratives_for(annotator) {
                    taken |= theirs.iter().any(|n| distinct.contains(n));
                }
            }
            if taken {
                return Err(ServiceError::Assembly(format!("annotator `{annotator}` would receive a narrative twice")));
            }
        }
        Ok(())
    }

    /// Assembles batches from working narratives not yet in any batch and
    /// registers them.
    pub fn assemble_batches(
        &self,
        annotators: &[String],
        n_batches: usize,
        seed: u64,
    ) -> Result<Vec<Batch>, ServiceError> {
        let mut inner = self.lock();
        let used: BTreeSet<&str> = inner
            .state
            .batches()
            .iter()
            .flat_map(|b| {
                std::iter::once(b.overlap_narrative.as_str())
                    .chain(b.assignments.values().flatten().map(String::as_str))
            })
            .collect();
        let pool: Vec<_> = self
            .corpus
            .narratives()
            .iter()
            .filter(|n| !n.is_backup && !used.contains(n.id.as_str()))
            .cloned()
            .collect();
        let offset = inner.state.batches().len();
        let mut batches = assemble_batches(&pool, annotators, n_batches, seed)?;
        for (i, batch) in batches.iter_mut().enumerate() {
            batch.id = format!("batch-{}", offset + i + 1);
        }
        let mut staged = inner.state.clone();
        for batch in &batches {
            self.check_batch(&staged, batch)?;
            staged.apply(&LogRecord::BatchRegistered { batch: batch.clone() }).map_err(ServiceError::Assembly)?;
        }
        for batch in &batches {
            Self::commit(&mut inner, LogRecord::BatchRegistered { batch: batch.clone() })?;
        }
        Ok(batches)
    }

    pub fn batches(&self) -> Vec<Batch> {
        self.lock().state.batches().to_vec()
    }

    pub fn iaa(&self, batch_id: &str) -> Result<IaaReport, ServiceError> {
        let state = self.snapshot();
        let batch = state.batch(batch_id).ok_or_else(|| ServiceError::UnknownBatch(batch_id.to_string()))?;
        monitor_overlap_iaa(batch, &state, &self.corpus, &self.candidates, &self.thresholds)
    }

    /// One gold record per annotated sentence.
    pub fn adjudicate(&self, policy: AdjudicationPolicy) -> Vec<GoldRecord> {
        let state = self.snapshot();
        adjudicate_gold(&state.annotations_by_sentence(), policy, &self.candidates)
    }

    /// Training examples from the adjudicated annotations.
    pub fn export(
        &self,
        policy: AdjudicationPolicy,
        setting: ExportSetting,
        token_budget: usize,
        tag_source: TagSource,
    ) -> Result<Vec<ExportRecord>, ServiceError> {
        let gold =
            load_gold(self.adjudicate(policy), &self.corpus).map_err(|e| ServiceError::Validation(e.to_string()))?;
        Ok(export_training_examples(&self.corpus, &gold, &self.candidates, setting, token_budget, tag_source))
    }
}
