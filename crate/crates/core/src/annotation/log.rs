use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, Batch, ServiceError, Session};
use crate::corpus::SentenceKey;

/// One line of the annotation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    BatchRegistered { batch: Batch },
    SessionCreated { session_id: String, annotator_id: String, narrative_id: String, timestamp: u64 },
    AnnotationSubmitted { session_id: String, annotation: Annotation },
}

/// Workflow state derived from the log. It is only ever changed by applying
/// records, so replaying a log always rebuilds the same value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct State {
    sessions: BTreeMap<String, Session>,
    by_pair: BTreeMap<(String, String), String>,
    batches: Vec<Batch>,
    applied: usize,
}

impl State {
    pub fn replay<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Result<Self, ServiceError> {
        let mut state = State::default();
        for (i, record) in records.into_iter().enumerate() {
            state.apply(record).map_err(|message| ServiceError::Replay { record: i, message })?;
        }
        Ok(state)
    }

    /// Applies one record, checking only what keeps the state well formed.
    /// Content validation against the corpus happens before a record is logged.
    pub fn apply(&mut self, record: &LogRecord) -> Result<(), String> {
        match record {
            LogRecord::BatchRegistered { batch } => {
                if self.batch(&batch.id).is_some() {
                    return Err(format!("batch `{}` registered twice", batch.id));
                }
                self.batches.push(batch.clone());
            }
            LogRecord::SessionCreated { session_id, annotator_id, narrative_id, .. } => {
                if self.sessions.contains_key(session_id) {
                    return Err(format!("session `{session_id}` created twice"));
                }
                let pair = (annotator_id.clone(), narrative_id.clone());
                if self.by_pair.contains_key(&pair) {
                    return Err(format!("annotator `{annotator_id}` already has a session on `{narrative_id}`"));
                }
                self.by_pair.insert(pair, session_id.clone());
                self.sessions.insert(
                    session_id.clone(),
                    Session {
                        id: session_id.clone(),
                        annotator_id: annotator_id.clone(),
                        narrative_id: narrative_id.clone(),
                        cursor: 0,
                        submitted: Vec::new(),
                    },
                );
            }
            LogRecord::AnnotationSubmitted { session_id, annotation } => {
                let session = self
                    .sessions
                    .get_mut(session_id)
                    .ok_or_else(|| format!("annotation for unknown session `{session_id}`"))?;
                if annotation.sentence_position != session.cursor {
                    return Err(format!(
                        "session `{session_id}` expects position {}, record has {}",
                        session.cursor, annotation.sentence_position
                    ));
                }
                session.submitted.push(annotation.clone());
                session.cursor += 1;
            }
        }
        self.applied += 1;
        Ok(())
    }

    /// Number of records applied so far.
    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.get(id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session_for(&self, annotator_id: &str, narrative_id: &str) -> Option<&Session> {
        let id = self.by_pair.get(&(annotator_id.to_string(), narrative_id.to_string()))?;
        self.sessions.get(id)
    }

    /// Identifier the next created session receives.
    pub fn next_session_id(&self) -> String {
        format!("s{:05}", self.sessions.len() + 1)
    }

    pub fn batch(&self, id: &str) -> Option<&Batch> {
        self.batches.iter().find(|b| b.id == id)
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    /// Every submitted annotation grouped by sentence, annotators in id order.
    pub fn annotations_by_sentence(&self) -> BTreeMap<SentenceKey, Vec<(String, Annotation)>> {
        let mut out: BTreeMap<SentenceKey, Vec<(String, Annotation)>> = BTreeMap::new();
        for session in self.sessions.values() {
            for annotation in &session.submitted {
                out.entry(SentenceKey::new(session.narrative_id.clone(), annotation.sentence_position))
                    .or_default()
                    .push((session.annotator_id.clone(), annotation.clone()));
            }
        }
        for entries in out.values_mut() {
            entries.sort_by(|a, b| a.0.cmp(&b.0));
        }
        out
    }
}

enum Sink {
    Memory,
    File(File),
}

/// Append-only record log, either in memory or backed by a line-delimited file.
pub struct EventLog {
    sink: Sink,
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn in_memory() -> Self {
        Self { sink: Sink::Memory, records: Vec::new() }
    }

    /// Opens (or creates) a log file and loads its records. An unterminated
    /// final line is the remnant of an unacknowledged write; it is cut off.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let storage = |e: std::io::Error| ServiceError::Storage(format!("{}: {e}", path.display()));
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path).map_err(storage)?;
        let mut content = String::new();
        file.read_to_string(&mut content).map_err(storage)?;
        let (records, committed) = decode_log(&content)?;
        if committed < content.len() {
            file.set_len(committed as u64).map_err(storage)?;
            file.seek(SeekFrom::End(0)).map_err(storage)?;
        }
        Ok(Self { sink: Sink::File(file), records })
    }

    /// Loads a log file into memory without modifying it. Later appends are
    /// not persisted.
    pub fn read_only(path: &Path) -> Result<Self, ServiceError> {
        let content =
            std::fs::read_to_string(path).map_err(|e| ServiceError::Storage(format!("{}: {e}", path.display())))?;
        let (records, _) = decode_log(&content)?;
        Ok(Self { sink: Sink::Memory, records })
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    /// Appends a record; it is durable when this returns `Ok`.
    pub fn append(&mut self, record: LogRecord) -> Result<(), ServiceError> {
        if let Sink::File(file) = &mut self.sink {
            let mut line = serde_json::to_string(&record).map_err(|e| ServiceError::Storage(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .and_then(|_| file.sync_data())
                .map_err(|e| ServiceError::Storage(e.to_string()))?;
        }
        self.records.push(record);
        Ok(())
    }
}

/// Decodes every terminated line; returns the records and the byte length
/// they occupy.
fn decode_log(content: &str) -> Result<(Vec<LogRecord>, usize), ServiceError> {
    let mut records = Vec::new();
    let mut offset = 0;
    for (i, line) in content.split_inclusive('\n').enumerate() {
        if !line.ends_with('\n') {
            break;
        }
        let record = serde_json::from_str::<LogRecord>(line.trim_end())
            .map_err(|e| ServiceError::Replay { record: i, message: e.to_string() })?;
        records.push(record);
        offset += line.len();
    }
    Ok((records, offset))
}
