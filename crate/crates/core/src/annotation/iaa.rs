use serde::{Deserialize, Serialize};

use super::{Batch, ServiceError, State};
use crate::corpus::{Corpus, Narrative};
use crate::extract::CandidateIndex;
use crate::metrics::{
    krippendorff_alpha, pairwise_segmentation_agreement, AlphaOutcome, ReliabilityMatrix, DEFAULT_WINDOW,
};

/// Minimum acceptable agreement on overlap narratives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IaaThresholds {
    pub alpha: f64,
    pub segmentation: f64,
    /// Transposition window for boundary matching, in characters.
    pub window: usize,
}

impl Default for IaaThresholds {
    fn default() -> Self {
        Self { alpha: 0.4, segmentation: 0.4, window: DEFAULT_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IaaStatus {
    /// Some annotators have not finished the overlap narrative.
    Pending { missing: Vec<String> },
    Complete {
        /// Candidate-selection agreement; `None` when the narrative has no candidates.
        alpha: Option<AlphaOutcome>,
        /// Mean pairwise agreement of added spans; `None` with a single annotator.
        segmentation: Option<f64>,
        flagged: bool,
        reasons: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaaReport {
    pub batch_id: String,
    pub narrative_id: String,
    pub qualification: bool,
    #[serde(flatten)]
    pub status: IaaStatus,
}

impl IaaReport {
    pub fn is_flagged(&self) -> bool {
        matches!(self.status, IaaStatus::Complete { flagged: true, .. })
    }
}

/// Agreement on a batch's overlap narrative among the batch's annotators.
///
/// Candidate selection is scored with nominal alpha over (sentence,
/// candidate) items valued selected or not. Added spans are compared as
/// boundaries over the narrative text, i.e. the sentences joined by single
/// spaces.
pub fn monitor_overlap_iaa(
    batch: &Batch,
    state: &State,
    corpus: &Corpus,
    candidates: &CandidateIndex,
    thresholds: &IaaThresholds,
) -> Result<IaaReport, ServiceError> {
    let narrative = corpus
        .get(&batch.overlap_narrative)
        .ok_or_else(|| ServiceError::UnknownNarrative(batch.overlap_narrative.clone()))?;
    let report = |status| IaaReport {
        batch_id: batch.id.clone(),
        narrative_id: narrative.id.clone(),
        qualification: batch.qualification,
        status,
    };

    let mut sessions = Vec::new();
    let mut missing = Vec::new();
    for annotator in batch.annotators() {
        match state.session_for(annotator, &narrative.id) {
            Some(session) if session.cursor >= narrative.sentences.len() => sessions.push(session),
            _ => missing.push(annotator.clone()),
        }
    }
    if !missing.is_empty() {
        return Ok(report(IaaStatus::Pending { missing }));
    }

    let mut items = Vec::new();
    for sentence in &narrative.sentences {
        for candidate in candidates.get(&sentence.key()) {
            let row = sessions
                .iter()
                .map(|s| Some(s.submitted[sentence.position].selected_candidate_ids.contains(&candidate.id)))
                .collect();
            items.push(row);
        }
    }
    let alpha = ReliabilityMatrix::new(items).ok().map(|m| krippendorff_alpha(&m).expect("matrix was validated"));

    let offsets = sentence_offsets(narrative);
    let length = narrative_length(narrative);
    let spans: Vec<Vec<(usize, usize)>> = sessions
        .iter()
        .map(|s| {
            s.submitted
                .iter()
                .flat_map(|a| {
                    let base = offsets[a.sentence_position];
                    a.added_spans.iter().map(move |sp| (base + sp.char_start, base + sp.char_end))
                })
                .collect()
        })
        .collect();
    let segmentation = pairwise_segmentation_agreement(&spans, length, thresholds.window)
        .map_err(|e| ServiceError::Validation(e.to_string()))?;

    let mut reasons = Vec::new();
    if let Some(AlphaOutcome::Score(a)) = alpha {
        if a < thresholds.alpha {
            reasons.push(format!("alpha {a:.3} below {:.3}", thresholds.alpha));
        }
    }
    if let Some(s) = segmentation {
        if s < thresholds.segmentation {
            reasons.push(format!("segmentation {s:.3} below {:.3}", thresholds.segmentation));
        }
    }
    Ok(report(IaaStatus::Complete { alpha, segmentation, flagged: !reasons.is_empty(), reasons }))
}

fn sentence_offsets(narrative: &Narrative) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(narrative.sentences.len());
    let mut next = 0;
    for sentence in &narrative.sentences {
        offsets.push(next);
        next += sentence.char_len() + 1;
    }
    offsets
}

fn narrative_length(narrative: &Narrative) -> usize {
    let chars: usize = narrative.sentences.iter().map(|s| s.char_len()).sum();
    chars + narrative.sentences.len().saturating_sub(1)
}
