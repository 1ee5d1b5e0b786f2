use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GoldIndex, Sentence};
use crate::extract::CandidateIndex;

/// Percentages of items in the first and second half of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSplit {
    pub first: f64,
    pub second: f64,
}

impl HalfSplit {
    fn from_counts(first: usize, second: usize) -> Option<Self> {
        let total = first + second;
        (total > 0)
            .then(|| Self { first: 100.0 * first as f64 / total as f64, second: 100.0 * second as f64 / total as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub total: usize,
    pub per_sentence: f64,
    pub per_narrative: f64,
    pub per_narrator: f64,
    pub sentence_half: Option<HalfSplit>,
    pub narrative_half: Option<HalfSplit>,
    /// Items whose position inside the sentence could not be resolved; they
    /// count towards the totals but not towards `sentence_half`.
    pub unplaced: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub narratives: usize,
    pub narrators: usize,
    pub sentences: usize,
    /// Candidates presented over the annotated narratives.
    pub candidates_extracted: usize,
    pub selected_candidates: ItemStats,
    pub added_spans: ItemStats,
}

#[derive(Default)]
struct Tally {
    total: usize,
    sentence: (usize, usize),
    narrative: (usize, usize),
    unplaced: usize,
}

impl Tally {
    /// `start` is the item's 1-based first token, when known.
    fn add(&mut self, start: Option<usize>, sentence: &Sentence, narrative_len: usize) {
        self.total += 1;
        if sentence.position >= narrative_len.div_ceil(2) {
            self.narrative.1 += 1;
        } else {
            self.narrative.0 += 1;
        }
        match start {
            // second half iff start > n / 2
            Some(start) if 2 * start > sentence.len() => self.sentence.1 += 1,
            Some(_) => self.sentence.0 += 1,
            None => self.unplaced += 1,
        }
    }

    fn finish(self, sentences: usize, narratives: usize, narrators: usize) -> ItemStats {
        let mean = |den: usize| if den == 0 { 0.0 } else { self.total as f64 / den as f64 };
        ItemStats {
            total: self.total,
            per_sentence: mean(sentences),
            per_narrative: mean(narratives),
            per_narrator: mean(narrators),
            sentence_half: HalfSplit::from_counts(self.sentence.0, self.sentence.1),
            narrative_half: HalfSplit::from_counts(self.narrative.0, self.narrative.1),
            unplaced: self.unplaced,
        }
    }
}

/// First token overlapping a character offset.
fn token_at(sentence: &Sentence, char_start: usize) -> Option<usize> {
    sentence.tokens.iter().find(|t| t.char_end > char_start).map(|t| t.index)
}

/// Summarises an annotated corpus over the narratives that carry gold records.
///
/// Selected candidates are placed in the sentence by their first token, which
/// requires the rendered text to match one of `candidates`; spans by the
/// token at their start offset.
pub fn corpus_statistics(gold: &GoldIndex, corpus: &Corpus, candidates: &CandidateIndex) -> StatsReport {
    let narratives: Vec<_> = gold.narrative_ids().into_iter().filter_map(|id| corpus.get(id)).collect();
    let narrators: BTreeSet<&str> = narratives.iter().map(|n| n.narrator_id.as_str()).collect();
    let sentences: usize = narratives.iter().map(|n| n.sentences.len()).sum();
    let candidates_extracted = narratives.iter().flat_map(|n| candidates.narrative_lists(n)).map(<[_]>::len).sum();

    let mut selected = Tally::default();
    let mut spans = Tally::default();
    for narrative in &narratives {
        for sentence in &narrative.sentences {
            let key = sentence.key();
            let records = gold.get(&key);
            let texts = records.iter().flat_map(|r| &r.selected_candidates);
            for (_, found) in candidates.resolve_rendered(&key, texts) {
                selected.add(found.map(|c| c.start_token()), sentence, narrative.sentences.len());
            }
            for record in records {
                for span in &record.added_spans {
                    spans.add(token_at(sentence, span.char_start), sentence, narrative.sentences.len());
                }
            }
        }
    }

    StatsReport {
        narratives: narratives.len(),
        narrators: narrators.len(),
        sentences,
        candidates_extracted,
        selected_candidates: selected.finish(sentences, narratives.len(), narrators.len()),
        added_spans: spans.finish(sentences, narratives.len(), narrators.len()),
    }
}
