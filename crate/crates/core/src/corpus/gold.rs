use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, SentenceKey};

/// A contiguous piece of sentence text, addressed by character offsets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl TextSpan {
    pub fn new(char_start: usize, char_end: usize, text: impl Into<String>) -> Self {
        Self { char_start, char_end, text: text.into() }
    }

    pub fn overlaps(&self, char_start: usize, char_end: usize) -> bool {
        self.char_start < char_end && char_start < self.char_end
    }
}

/// One annotator's (or one adjudicated) decision for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub narrative_id: String,
    pub sentence_position: usize,
    /// Rendered triplets of the selected candidates.
    #[serde(default)]
    pub selected_candidates: Vec<String>,
    #[serde(default)]
    pub added_spans: Vec<TextSpan>,
    pub annotator_id: String,
}

impl GoldRecord {
    pub fn key(&self) -> SentenceKey {
        SentenceKey::new(self.narrative_id.clone(), self.sentence_position)
    }
}

/// Gold records grouped by sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldIndex {
    records: BTreeMap<SentenceKey, Vec<GoldRecord>>,
}

impl GoldIndex {
    pub fn get(&self, key: &SentenceKey) -> &[GoldRecord] {
        self.records.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SentenceKey, &Vec<GoldRecord>)> {
        self.records.iter()
    }

    pub fn records(&self) -> impl Iterator<Item = &GoldRecord> {
        self.records.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Narrative ids that carry at least one record, in sorted order.
    pub fn narrative_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.records.keys().map(|k| k.narrative_id.as_str()).collect();
        ids.dedup();
        ids
    }

    pub fn total_selected(&self) -> usize {
        self.records().map(|r| r.selected_candidates.len()).sum()
    }

    pub fn total_spans(&self) -> usize {
        self.records().map(|r| r.added_spans.len()).sum()
    }
}

/// Groups gold records by sentence after checking them against the corpus.
///
/// Records are identified in errors by their 0-based position in the stream.
pub fn load_gold<I>(records: I, corpus: &Corpus) -> Result<GoldIndex, CorpusError>
where
    I: IntoIterator<Item = GoldRecord>,
{
    let mut index = GoldIndex::default();
    for (record_no, record) in records.into_iter().enumerate() {
        let Some(narrative) = corpus.get(&record.narrative_id) else {
            return Err(CorpusError::Reference {
                record: record_no,
                message: format!("unknown narrative `{}`", record.narrative_id),
            });
        };
        let Some(sentence) = narrative.sentences.get(record.sentence_position) else {
            return Err(CorpusError::Reference {
                record: record_no,
                message: format!("narrative `{}` has no sentence {}", record.narrative_id, record.sentence_position),
            });
        };
        for span in &record.added_spans {
            let actual = sentence.slice(span.char_start, span.char_end);
            if span.char_start >= span.char_end || actual != Some(span.text.as_str()) {
                return Err(CorpusError::Integrity {
                    record: record_no,
                    message: format!(
                        "span {}..{} text `{}` does not match sentence text {:?}",
                        span.char_start, span.char_end, span.text, actual
                    ),
                });
            }
        }
        index.records.entry(record.key()).or_default().push(record);
    }
    Ok(index)
}
