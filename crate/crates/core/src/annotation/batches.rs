use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Batch, ServiceError};
use crate::corpus::Narrative;

/// Splits narratives into `n_batches` batches.
///
/// Each batch gets one overlap narrative labelled by every annotator, and the
/// overlap narratives come from pairwise distinct narrators. The remaining
/// narratives are shuffled and dealt round-robin over batches, then over the
/// annotators of each batch, so sizes differ by at most one.
pub fn assemble_batches(
    narratives: &[Narrative],
    annotators: &[String],
    n_batches: usize,
    seed: u64,
) -> Result<Vec<Batch>, ServiceError> {
    if n_batches == 0 {
        return Err(ServiceError::Assembly("at least one batch is required".into()));
    }
    if annotators.is_empty() {
        return Err(ServiceError::Assembly("at least one annotator is required".into()));
    }
    let distinct: BTreeSet<&String> = annotators.iter().collect();
    if distinct.len() != annotators.len() {
        return Err(ServiceError::Assembly("annotator ids must be distinct".into()));
    }
    let mut seen_ids = BTreeSet::new();
    for narrative in narratives {
        if !seen_ids.insert(narrative.id.as_str()) {
            return Err(ServiceError::Assembly(format!("narrative `{}` listed twice", narrative.id)));
        }
    }

    let mut by_narrator: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, narrative) in narratives.iter().enumerate() {
        by_narrator.entry(narrative.narrator_id.as_str()).or_default().push(i);
    }
    if by_narrator.len() < n_batches {
        return Err(ServiceError::Assembly(format!(
            "{n_batches} batches need overlap narratives from {n_batches} distinct narrators, but only {} narrators are available",
            by_narrator.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut narrators: Vec<&str> = by_narrator.keys().copied().collect();
    narrators.shuffle(&mut rng);
    let mut overlap = Vec::with_capacity(n_batches);
    for narrator in &narrators[..n_batches] {
        let pool = &by_narrator[narrator];
        overlap.push(pool[rng.random_range(0..pool.len())]);
    }

    let mut rest: Vec<usize> = (0..narratives.len()).filter(|i| !overlap.contains(i)).collect();
    rest.shuffle(&mut rng);

    let mut batches: Vec<Batch> = overlap
        .iter()
        .enumerate()
        .map(|(b, &o)| Batch {
            id: format!("batch-{}", b + 1),
            assignments: annotators.iter().map(|a| (a.clone(), Vec::new())).collect(),
            overlap_narrative: narratives[o].id.clone(),
            qualification: false,
        })
        .collect();
    for (i, &n) in rest.iter().enumerate() {
        let batch = &mut batches[i % n_batches];
        let annotator = &annotators[(i / n_batches) % annotators.len()];
        batch.assignments.get_mut(annotator).expect("every annotator has an entry").push(narratives[n].id.clone());
    }
    Ok(batches)
}
