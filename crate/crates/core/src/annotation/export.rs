use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::Tag;
use crate::corpus::{Corpus, GoldIndex, GoldRecord, Narrative, Sentence};
use crate::extract::CandidateIndex;

pub const DEFAULT_TOKEN_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportSetting {
    /// One record per (sentence, candidate), labelled new or not.
    Selection,
    /// One record per sentence with a tag per token.
    Tagging,
}

impl FromStr for ExportSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "selection" => Ok(Self::Selection),
            "tagging" => Ok(Self::Tagging),
            other => Err(format!("unknown setting `{other}` (expected selection or tagging)")),
        }
    }
}

/// Which gold annotations mark a token as part of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSource {
    /// Added spans only.
    #[default]
    Spans,
    /// Tokens of selected candidates as well as added spans.
    CandidatesAndSpans,
}

impl FromStr for TagSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spans" => Ok(Self::Spans),
            "candidates_and_spans" | "candidates+spans" => Ok(Self::CandidatesAndSpans),
            other => Err(format!("unknown tag source `{other}` (expected spans or candidates_and_spans)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    New,
    NotNew,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionExample {
    pub narrative_id: String,
    pub sentence_position: usize,
    pub candidate_id: String,
    pub context_new_events: Vec<String>,
    pub sentence_text: String,
    pub candidate_text: String,
    pub label: Label,
    /// The sentence and candidate alone exceed the token budget.
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggingExample {
    pub narrative_id: String,
    pub sentence_position: usize,
    pub context_new_events: Vec<String>,
    pub sentence_tokens: Vec<String>,
    pub tags: Vec<Tag>,
    /// The sentence alone exceeds the token budget.
    pub overflow: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExportRecord {
    Selection(SelectionExample),
    Tagging(TaggingExample),
}

impl ExportRecord {
    pub fn context(&self) -> &[String] {
        match self {
            Self::Selection(r) => &r.context_new_events,
            Self::Tagging(r) => &r.context_new_events,
        }
    }

    pub fn overflow(&self) -> bool {
        match self {
            Self::Selection(r) => r.overflow,
            Self::Tagging(r) => r.overflow,
        }
    }

    /// Whitespace tokens the record feeds a model: context events plus the
    /// sentence (and candidate, for selection).
    pub fn token_total(&self) -> usize {
        let context: usize = self.context().iter().map(|e| whitespace_tokens(e)).sum();
        context
            + match self {
                Self::Selection(r) => whitespace_tokens(&r.sentence_text) + whitespace_tokens(&r.candidate_text),
                Self::Tagging(r) => r.sentence_tokens.len(),
            }
    }
}

fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Gold event texts of one sentence: selected candidates in record order,
/// then added spans by offset. Several records for the sentence are merged
/// without duplicates.
pub fn gold_events(records: &[GoldRecord]) -> Vec<String> {
    let mut selected: Vec<&str> = Vec::new();
    for text in records.iter().flat_map(|r| &r.selected_candidates) {
        if !selected.contains(&text.as_str()) {
            selected.push(text);
        }
    }
    let spans: BTreeMap<(usize, usize), &str> =
        records.iter().flat_map(|r| &r.added_spans).map(|s| ((s.char_start, s.char_end), s.text.as_str())).collect();
    selected.into_iter().chain(spans.into_values()).map(str::to_string).collect()
}

/// Projects gold annotations onto the tokens of a sentence. A token is `E`
/// when its characters overlap an added span or, with
/// [`TagSource::CandidatesAndSpans`], when it belongs to a selected candidate.
pub fn project_tags(
    sentence: &Sentence,
    records: &[GoldRecord],
    candidates: &CandidateIndex,
    source: TagSource,
) -> Vec<Tag> {
    let mut event = vec![false; sentence.len()];
    for span in records.iter().flat_map(|r| &r.added_spans) {
        for token in &sentence.tokens {
            if span.overlaps(token.char_start, token.char_end) {
                event[token.index - 1] = true;
            }
        }
    }
    if source == TagSource::CandidatesAndSpans {
        let key = sentence.key();
        let texts = records.iter().flat_map(|r| &r.selected_candidates);
        for (_, candidate) in candidates.resolve_rendered(&key, texts) {
            for index in candidate.into_iter().flat_map(|c| c.all_tokens()) {
                event[index - 1] = true;
            }
        }
    }
    event.into_iter().map(|e| if e { Tag::E } else { Tag::O }).collect()
}

/// Drops whole events from the front of `context` until the record fits.
fn fit_context(context: &[String], fixed: usize, budget: usize) -> (Vec<String>, bool) {
    let mut total = fixed + context.iter().map(|e| whitespace_tokens(e)).sum::<usize>();
    let mut start = 0;
    while total > budget && start < context.len() {
        total -= whitespace_tokens(&context[start]);
        start += 1;
    }
    (context[start..].to_vec(), total > budget)
}

/// Model-ready examples for every sentence of the narratives present in gold,
/// in corpus order.
pub fn export_training_examples(
    corpus: &Corpus,
    gold: &GoldIndex,
    candidates: &CandidateIndex,
    setting: ExportSetting,
    token_budget: usize,
    tag_source: TagSource,
) -> Vec<ExportRecord> {
    let annotated = gold.narrative_ids();
    let mut out = Vec::new();
    for narrative in corpus.narratives() {
        if annotated.binary_search(&narrative.id.as_str()).is_ok() {
            export_narrative(narrative, gold, candidates, setting, token_budget, tag_source, &mut out);
        }
    }
    out
}

fn export_narrative(
    narrative: &Narrative,
    gold: &GoldIndex,
    candidates: &CandidateIndex,
    setting: ExportSetting,
    budget: usize,
    tag_source: TagSource,
    out: &mut Vec<ExportRecord>,
) {
    let mut context: Vec<String> = Vec::new();
    for sentence in &narrative.sentences {
        let key = sentence.key();
        let records = gold.get(&key);
        match setting {
            ExportSetting::Selection => {
                let texts = records.iter().flat_map(|r| &r.selected_candidates);
                let selected: Vec<&str> = candidates
                    .resolve_rendered(&key, texts)
                    .into_iter()
                    .filter_map(|(_, c)| c.map(|c| c.id.as_str()))
                    .collect();
                for candidate in candidates.get(&key) {
                    let candidate_text = candidate.rendered();
                    let label = if selected.contains(&candidate.id.as_str()) { Label::New } else { Label::NotNew };
                    let fixed = whitespace_tokens(&sentence.text) + whitespace_tokens(&candidate_text);
                    let (context_new_events, overflow) = fit_context(&context, fixed, budget);
                    out.push(ExportRecord::Selection(SelectionExample {
                        narrative_id: narrative.id.clone(),
                        sentence_position: sentence.position,
                        candidate_id: candidate.id.clone(),
                        context_new_events,
                        sentence_text: sentence.text.clone(),
                        candidate_text,
                        label,
                        overflow,
                    }));
                }
            }
            ExportSetting::Tagging => {
                let (context_new_events, overflow) = fit_context(&context, sentence.len(), budget);
                out.push(ExportRecord::Tagging(TaggingExample {
                    narrative_id: narrative.id.clone(),
                    sentence_position: sentence.position,
                    context_new_events,
                    sentence_tokens: sentence.tokens.iter().map(|t| t.surface.clone()).collect(),
                    tags: project_tags(sentence, records, candidates, tag_source),
                    overflow,
                }));
            }
        }
        context.extend(gold_events(records));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TextSpan;

    #[test]
    fn context_drops_oldest_events_first() {
        let context: Vec<String> = ["a b", "c d", "e f"].iter().map(|s| s.to_string()).collect();
        let (kept, overflow) = fit_context(&context, 5, 9);
        assert_eq!(kept, vec!["c d", "e f"]);
        assert!(!overflow);
        let (kept, overflow) = fit_context(&context, 5, 11);
        assert_eq!(kept.len(), 3);
        assert!(!overflow);
        let (kept, overflow) = fit_context(&context, 10, 9);
        assert!(kept.is_empty());
        assert!(overflow);
    }

    #[test]
    fn spans_project_onto_overlapping_tokens() {
        let sentence = Sentence::from_rows(
            "n",
            0,
            &[
                ("Then", "ADV", 3, "advmod"),
                ("we", "PRON", 3, "nsubj"),
                ("went", "VERB", 0, "root"),
                ("to", "ADP", 6, "case"),
                ("the", "DET", 6, "det"),
                ("beach", "NOUN", 3, "obl"),
                ("today", "NOUN", 3, "obl:tmod"),
            ],
        )
        .unwrap();
        // "to the beach" covers tokens 4 to 6.
        let record = GoldRecord {
            narrative_id: "n".into(),
            sentence_position: 0,
            selected_candidates: vec!["we — went — today".into()],
            added_spans: vec![TextSpan::new(13, 25, "to the beach")],
            annotator_id: "x".into(),
        };
        let candidates = CandidateIndex::from_candidates(crate::extract::extract_candidates(&sentence));
        let tags = project_tags(&sentence, std::slice::from_ref(&record), &candidates, TagSource::Spans);
        use Tag::{E, O};
        assert_eq!(tags, vec![O, O, O, E, E, E, O]);
        let tags = project_tags(&sentence, &[record], &candidates, TagSource::CandidatesAndSpans);
        assert_eq!(tags, vec![O, E, E, E, E, E, E]);
    }

    #[test]
    fn gold_events_merge_records() {
        let a = GoldRecord {
            narrative_id: "n".into(),
            sentence_position: 0,
            selected_candidates: vec!["x".into(), "y".into()],
            added_spans: vec![TextSpan::new(5, 7, "late")],
            annotator_id: "a".into(),
        };
        let mut b = a.clone();
        b.selected_candidates = vec!["y".into(), "z".into()];
        b.added_spans = vec![TextSpan::new(0, 2, "early"), TextSpan::new(5, 7, "late")];
        assert_eq!(gold_events(&[a, b]), vec!["x", "y", "z", "early", "late"]);
    }
}
