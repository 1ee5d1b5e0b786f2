use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Annotation;
use crate::corpus::{GoldRecord, SentenceKey, TextSpan};
use crate::extract::CandidateIndex;

/// Submitted annotations per sentence as `(annotator, annotation)` pairs.
pub type SentenceAnnotations = BTreeMap<SentenceKey, Vec<(String, Annotation)>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjudicationPolicy {
    /// Keep what more than half of the sentence's annotators chose.
    #[default]
    Majority,
    /// Keep everything any annotator chose.
    Union,
}

impl AdjudicationPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Majority => "majority",
            Self::Union => "union",
        }
    }

    fn keeps(self, votes: usize, annotators: usize) -> bool {
        match self {
            Self::Majority => votes * 2 > annotators,
            Self::Union => votes > 0,
        }
    }
}

impl fmt::Display for AdjudicationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjudicationPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(Self::Majority),
            "union" => Ok(Self::Union),
            other => Err(format!("unknown adjudication policy `{other}` (expected majority or union)")),
        }
    }
}

/// Merges the annotations of each sentence into one gold record.
///
/// Spans are matched by exact offsets. A sentence with a single annotator
/// passes through unchanged and keeps that annotator's id; merged records are
/// attributed to `"<policy>:<annotator>,<annotator>,..."`. Selected candidate
/// ids become rendered triplets, in candidate order.
pub fn adjudicate_gold(
    annotations: &SentenceAnnotations,
    policy: AdjudicationPolicy,
    candidates: &CandidateIndex,
) -> Vec<GoldRecord> {
    annotations
        .iter()
        .filter(|(_, entries)| !entries.is_empty())
        .map(|(key, entries)| adjudicate_sentence(key, entries, policy, candidates))
        .collect()
}

fn adjudicate_sentence(
    key: &SentenceKey,
    entries: &[(String, Annotation)],
    policy: AdjudicationPolicy,
    candidates: &CandidateIndex,
) -> GoldRecord {
    let m = entries.len();
    let (kept_ids, spans, annotator_id) = if m == 1 {
        let (annotator, annotation) = &entries[0];
        (annotation.selected_candidate_ids.clone(), annotation.added_spans.clone(), annotator.clone())
    } else {
        let mut id_votes: BTreeMap<&str, usize> = BTreeMap::new();
        let mut span_votes: BTreeMap<(usize, usize), (usize, &TextSpan)> = BTreeMap::new();
        for (_, annotation) in entries {
            for id in &annotation.selected_candidate_ids {
                *id_votes.entry(id).or_default() += 1;
            }
            let distinct: BTreeMap<(usize, usize), &TextSpan> =
                annotation.added_spans.iter().map(|s| ((s.char_start, s.char_end), s)).collect();
            for (offsets, span) in distinct {
                span_votes.entry(offsets).or_insert((0, span)).0 += 1;
            }
        }
        let ids: BTreeSet<String> =
            id_votes.into_iter().filter(|&(_, v)| policy.keeps(v, m)).map(|(id, _)| id.to_string()).collect();
        let spans = span_votes.into_values().filter(|&(v, _)| policy.keeps(v, m)).map(|(_, s)| s.clone()).collect();
        let names: Vec<&str> = entries.iter().map(|(a, _)| a.as_str()).collect();
        (ids, spans, format!("{policy}:{}", names.join(",")))
    };

    let list = candidates.get(key);
    let mut selected: Vec<String> = list.iter().filter(|c| kept_ids.contains(&c.id)).map(|c| c.rendered()).collect();
    selected.extend(kept_ids.iter().filter(|id| !list.iter().any(|c| &c.id == *id)).cloned());

    GoldRecord {
        narrative_id: key.narrative_id.clone(),
        sentence_position: key.position,
        selected_candidates: selected,
        added_spans: spans,
        annotator_id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{ArgumentSpan, EventCandidate};

    fn candidate(id: &str, predicate: &str) -> EventCandidate {
        EventCandidate {
            id: id.into(),
            narrative_id: "n".into(),
            sentence_position: 0,
            subject: ArgumentSpan { tokens: vec![1], text: "I".into() },
            predicate: ArgumentSpan { tokens: vec![2], text: predicate.into() },
            object: None,
            order_key: 2,
            reduced: false,
        }
    }

    fn index() -> CandidateIndex {
        CandidateIndex::from_candidates(vec![candidate("c1", "ran"), candidate("c2", "swam")])
    }

    fn annotation(ids: &[&str], spans: &[(usize, usize, &str)]) -> Annotation {
        Annotation {
            sentence_position: 0,
            selected_candidate_ids: ids.iter().map(|s| s.to_string()).collect(),
            added_spans: spans.iter().map(|&(a, b, t)| TextSpan::new(a, b, t)).collect(),
            timestamp: 0,
        }
    }

    fn votes(ids_per_annotator: &[&[&str]]) -> SentenceAnnotations {
        let entries =
            ids_per_annotator.iter().enumerate().map(|(i, ids)| (format!("a{i}"), annotation(ids, &[]))).collect();
        BTreeMap::from([(SentenceKey::new("n", 0), entries)])
    }

    #[test]
    fn majority_keeps_three_of_five() {
        let input = votes(&[&["c1"], &["c1"], &["c1", "c2"], &["c2"], &[]]);
        let gold = adjudicate_gold(&input, AdjudicationPolicy::Majority, &index());
        assert_eq!(gold[0].selected_candidates, vec!["I — ran"]);
        assert_eq!(gold[0].annotator_id, "majority:a0,a1,a2,a3,a4");
    }

    #[test]
    fn two_of_five_only_survives_union() {
        let input = votes(&[&["c2"], &["c2"], &[], &[], &[]]);
        let majority = adjudicate_gold(&input, AdjudicationPolicy::Majority, &index());
        assert!(majority[0].selected_candidates.is_empty());
        let union = adjudicate_gold(&input, AdjudicationPolicy::Union, &index());
        assert_eq!(union[0].selected_candidates, vec!["I — swam"]);
    }

    #[test]
    fn single_annotator_passes_through() {
        let entries = vec![("solo".to_string(), annotation(&["c2", "c1"], &[(4, 9, "swam "), (0, 1, "I")]))];
        let input = BTreeMap::from([(SentenceKey::new("n", 0), entries)]);
        for policy in [AdjudicationPolicy::Majority, AdjudicationPolicy::Union] {
            let gold = adjudicate_gold(&input, policy, &index());
            assert_eq!(gold[0].annotator_id, "solo");
            assert_eq!(gold[0].selected_candidates, vec!["I — ran", "I — swam"]);
            assert_eq!(gold[0].added_spans, input[&SentenceKey::new("n", 0)][0].1.added_spans);
        }
    }

    #[test]
    fn spans_match_on_exact_offsets() {
        let entries = vec![
            ("a".to_string(), annotation(&[], &[(0, 3, "abc")])),
            ("b".to_string(), annotation(&[], &[(0, 3, "abc"), (0, 3, "abc")])),
            ("c".to_string(), annotation(&[], &[(0, 2, "ab")])),
        ];
        let input = BTreeMap::from([(SentenceKey::new("n", 0), entries)]);
        let gold = adjudicate_gold(&input, AdjudicationPolicy::Majority, &index());
        assert_eq!(gold[0].added_spans, vec![TextSpan::new(0, 3, "abc")]);
        let gold = adjudicate_gold(&input, AdjudicationPolicy::Union, &index());
        assert_eq!(gold[0].added_spans.len(), 2);
    }
}
