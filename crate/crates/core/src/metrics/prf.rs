use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::baselines::TagSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    /// Scores from confusion counts; empty denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1, tp, fp, fn_ }
    }
}

/// Micro-averaged selection scores over candidate ids.
///
/// `universe` holds every candidate id that could have been selected; ids
/// outside it on either side are a reference error.
pub fn selection_prf<'a, P, G>(predicted: P, gold: G, universe: &BTreeSet<String>) -> Result<Prf, MetricsError>
where
    P: IntoIterator<Item = &'a BTreeSet<String>>,
    G: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let collect = |sets: &mut dyn Iterator<Item = &'a BTreeSet<String>>| -> Result<BTreeSet<&'a str>, MetricsError> {
        let mut all = BTreeSet::new();
        for id in sets.flatten() {
            if !universe.contains(id) {
                return Err(MetricsError::UnknownCandidate(id.clone()));
            }
            all.insert(id.as_str());
        }
        Ok(all)
    };
    let predicted = collect(&mut predicted.into_iter())?;
    let gold = collect(&mut gold.into_iter())?;
    let tp = predicted.intersection(&gold).count();
    Ok(Prf::from_counts(tp, predicted.len() - tp, gold.len() - tp))
}

/// Micro-averaged token scores with `E` as the positive class.
pub fn tagging_prf(predicted: &[TagSequence], gold: &[TagSequence]) -> Result<Prf, MetricsError> {
    if predicted.len() != gold.len() {
        return Err(MetricsError::Alignment {
            sentence: "*".into(),
            message: format!("{} predicted sequences for {} gold sequences", predicted.len(), gold.len()),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        if p.key != g.key || p.tags.len() != g.tags.len() {
            return Err(MetricsError::Alignment {
                sentence: g.key.to_string(),
                message: format!(
                    "predicted {} ({} tags) does not align with gold ({} tags)",
                    p.key,
                    p.tags.len(),
                    g.tags.len()
                ),
            });
        }
        for (pt, gt) in p.tags.iter().zip(&g.tags) {
            match (pt.is_event(), gt.is_event()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::Tag;
    use crate::corpus::SentenceKey;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn universe() -> BTreeSet<String> {
        set(&["c1", "c2", "c3", "c4"])
    }

    #[test]
    fn perfect_selection() {
        let p = selection_prf([&set(&["c1", "c3"])], [&set(&["c1", "c3"])], &universe()).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_overlap() {
        let p = selection_prf([&set(&["c1", "c2"])], [&set(&["c2", "c3"])], &universe()).unwrap();
        assert_eq!((p.tp, p.fp, p.fn_), (1, 1, 1));
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let p = selection_prf([&set(&[])], [&set(&["c1"])], &universe()).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn foreign_ids_are_rejected() {
        let err = selection_prf([&set(&["c9"])], [&set(&["c1"])], &universe()).unwrap_err();
        assert_eq!(err, MetricsError::UnknownCandidate("c9".into()));
    }

    fn seq(events: &[usize], n: usize) -> TagSequence {
        TagSequence {
            key: SentenceKey::new("n", 0),
            tags: (1..=n).map(|i| if events.contains(&i) { Tag::E } else { Tag::O }).collect(),
        }
    }

    #[test]
    fn token_overlap() {
        let p = tagging_prf(&[seq(&[3, 4], 10)], &[seq(&[2, 3], 10)]).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        let p = tagging_prf(&[seq(&[2, 3], 10)], &[seq(&[2, 3], 10)]).unwrap();
        assert_eq!(p.f1, 1.0);
        let p = tagging_prf(&[seq(&[], 10)], &[seq(&[2], 10)]).unwrap();
        assert_eq!(p.recall, 0.0);
    }

    #[test]
    fn length_mismatch_names_sentence() {
        let err = tagging_prf(&[seq(&[], 9)], &[seq(&[], 10)]).unwrap_err();
        assert!(matches!(err, MetricsError::Alignment { ref sentence, .. } if sentence == "n#0"), "{err}");
    }
}
