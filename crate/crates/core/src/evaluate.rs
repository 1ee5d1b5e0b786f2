//! Baseline predictions in the gold record format, and their scoring.
//!
//! Predictions are [`GoldRecord`]s so that they can be stored, loaded and
//! validated exactly like gold. Selection predictions carry rendered
//! triplets; tagging predictions carry one added span per run of `E` tokens.

use std::collections::BTreeSet;

use crate::annotation::{project_tags, TagSource};
use crate::baselines::{select_candidates, tag_tokens, SelectorStrategy, Tag, TagSequence, TaggerStrategy};
use crate::corpus::{Corpus, GoldIndex, GoldRecord, Narrative, Sentence, SentenceKey, TextSpan};
use crate::extract::CandidateIndex;
use crate::metrics::{selection_prf, tagging_prf, MetricsError, Prf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{source_name} record for sentence {sentence} names `{text}`, which is not among its candidates")]
    UnknownCandidate { source_name: &'static str, sentence: SentenceKey, text: String },
    #[error("narrative `{0}` is not in the corpus")]
    UnknownNarrative(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Attribution used on baseline prediction records.
pub fn baseline_annotator(strategy_name: &str) -> String {
    format!("baseline:{strategy_name}")
}

/// One record per sentence with the strategy's selected candidates.
pub fn selection_predictions<'a>(
    strategy: SelectorStrategy,
    narratives: impl IntoIterator<Item = &'a Narrative>,
    candidates: &CandidateIndex,
) -> Vec<GoldRecord> {
    let annotator = baseline_annotator(strategy.name());
    let mut out = Vec::new();
    for narrative in narratives {
        let lists = candidates.narrative_lists(narrative);
        let picked = select_candidates(strategy, &narrative.id, &lists);
        for ((sentence, list), ids) in narrative.sentences.iter().zip(&lists).zip(picked) {
            out.push(GoldRecord {
                narrative_id: narrative.id.clone(),
                sentence_position: sentence.position,
                selected_candidates: list.iter().filter(|c| ids.contains(&c.id)).map(|c| c.rendered()).collect(),
                added_spans: Vec::new(),
                annotator_id: annotator.clone(),
            });
        }
    }
    out
}

/// Spans covering each maximal run of `E` tokens.
pub fn tags_to_spans(sentence: &Sentence, tags: &[Tag]) -> Vec<TextSpan> {
    let mut spans = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for (token, tag) in sentence.tokens.iter().zip(tags) {
        run = match (run, tag.is_event()) {
            (Some((start, _)), true) => Some((start, token.char_end)),
            (None, true) => Some((token.char_start, token.char_end)),
            (Some((start, end)), false) => {
                spans.push((start, end));
                None
            }
            (None, false) => None,
        };
    }
    spans.extend(run);
    spans
        .into_iter()
        .map(|(start, end)| TextSpan::new(start, end, sentence.slice(start, end).unwrap_or_default()))
        .collect()
}

/// One record per sentence with the tagger's `E` runs as spans.
pub fn tagging_predictions<'a>(
    strategy: TaggerStrategy,
    narratives: impl IntoIterator<Item = &'a Narrative>,
) -> Vec<GoldRecord> {
    let annotator = baseline_annotator(strategy.name());
    narratives
        .into_iter()
        .flat_map(|n| n.sentences.iter())
        .map(|sentence| GoldRecord {
            narrative_id: sentence.narrative_id.clone(),
            sentence_position: sentence.position,
            selected_candidates: Vec::new(),
            added_spans: tags_to_spans(sentence, &tag_tokens(strategy, sentence).tags),
            annotator_id: annotator.clone(),
        })
        .collect()
}

fn scope_narratives<'a>(corpus: &'a Corpus, scope: &[String]) -> Result<Vec<&'a Narrative>, EvalError> {
    scope.iter().map(|id| corpus.get(id).ok_or_else(|| EvalError::UnknownNarrative(id.clone()))).collect()
}

fn selected_ids(
    records: &GoldIndex,
    candidates: &CandidateIndex,
    key: &SentenceKey,
    source_name: &'static str,
) -> Result<BTreeSet<String>, EvalError> {
    let texts = records.get(key).iter().flat_map(|r| &r.selected_candidates);
    candidates
        .resolve_rendered(key, texts)
        .into_iter()
        .map(|(text, found)| {
            found.map(|c| c.id.clone()).ok_or_else(|| EvalError::UnknownCandidate {
                source_name,
                sentence: key.clone(),
                text: text.clone(),
            })
        })
        .collect()
}

/// Micro-averaged selection scores over every candidate of the narratives in
/// `scope`. Sentences without records count as selecting nothing.
pub fn evaluate_selection(
    corpus: &Corpus,
    candidates: &CandidateIndex,
    gold: &GoldIndex,
    predictions: &GoldIndex,
    scope: &[String],
) -> Result<Prf, EvalError> {
    let mut universe = BTreeSet::new();
    let mut gold_sets = Vec::new();
    let mut predicted_sets = Vec::new();
    for narrative in scope_narratives(corpus, scope)? {
        for sentence in &narrative.sentences {
            let key = sentence.key();
            universe.extend(candidates.get(&key).iter().map(|c| c.id.clone()));
            gold_sets.push(selected_ids(gold, candidates, &key, "gold")?);
            predicted_sets.push(selected_ids(predictions, candidates, &key, "prediction")?);
        }
    }
    Ok(selection_prf(&predicted_sets, &gold_sets, &universe)?)
}

/// Micro-averaged token scores over every sentence of the narratives in
/// `scope`. Both sides are projected onto tokens the same way.
pub fn evaluate_tagging(
    corpus: &Corpus,
    candidates: &CandidateIndex,
    gold: &GoldIndex,
    predictions: &GoldIndex,
    scope: &[String],
    tag_source: TagSource,
) -> Result<Prf, EvalError> {
    let mut gold_tags = Vec::new();
    let mut predicted_tags = Vec::new();
    for narrative in scope_narratives(corpus, scope)? {
        for sentence in &narrative.sentences {
            let key = sentence.key();
            gold_tags.push(TagSequence {
                key: key.clone(),
                tags: project_tags(sentence, gold.get(&key), candidates, tag_source),
            });
            predicted_tags
                .push(TagSequence { tags: project_tags(sentence, predictions.get(&key), candidates, tag_source), key });
        }
    }
    Ok(tagging_prf(&predicted_tags, &gold_tags)?)
}
