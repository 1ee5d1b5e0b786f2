//! Boundary-based segmentation agreement.
//!
//! Each annotator's spans over a text of `length` units become a set of
//! boundary positions in `0..=length` (every span contributes its start and
//! its end). Two boundary sets are compared by boundary edit distance:
//! exact matches are free, an unmatched boundary costs 1 (an addition or
//! deletion), and a boundary of one set may instead be transposed onto a
//! boundary of the other set lying `d < window` positions away at cost
//! `d / window`. Boundary similarity is
//!
//! ```text
//! B = 1 - (additions + transposition cost) / (additions + transpositions + matches)
//! ```
//!
//! (1 when neither set has boundaries), and the reported agreement is the
//! chance-corrected `(B - Ae) / (1 - Ae)` where `Ae` is the probability that
//! two coders with the observed boundary rates agree on a position.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const DEFAULT_WINDOW: usize = 2;

/// Boundary positions of a span list over a text of `length` units.
pub fn spans_to_boundaries(spans: &[(usize, usize)], length: usize) -> Result<BTreeSet<usize>, MetricsError> {
    let mut boundaries = BTreeSet::new();
    for &(start, end) in spans {
        if start >= end || end > length {
            return Err(MetricsError::SpanOutOfRange { start, end, length });
        }
        boundaries.insert(start);
        boundaries.insert(end);
    }
    Ok(boundaries)
}

/// Minimal edit between two boundary sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdit {
    pub matches: usize,
    pub additions: usize,
    pub transpositions: usize,
    /// Sum of transposition offsets divided by the window.
    pub transposition_cost: f64,
}

impl BoundaryEdit {
    pub fn similarity(&self) -> f64 {
        let denominator = self.additions + self.transpositions + self.matches;
        if denominator == 0 {
            return 1.0;
        }
        1.0 - (self.additions as f64 + self.transposition_cost) / denominator as f64
    }
}

/// Minimal-cost boundary edit. Among equal-cost edits the one with more
/// transpositions (fewer edit operations) wins.
pub fn boundary_edit(a: &BTreeSet<usize>, b: &BTreeSet<usize>, window: usize) -> Result<BoundaryEdit, MetricsError> {
    if window == 0 {
        return Err(MetricsError::BadWindow);
    }
    let matches = a.intersection(b).count();
    let mut unmatched: Vec<(usize, bool)> =
        a.difference(b).map(|&p| (p, true)).chain(b.difference(a).map(|&p| (p, false))).collect();
    unmatched.sort_unstable();

    // Sweep in position order. A state is the set of boundaries still open
    // for transposition; costs are kept in units of 1/window to stay exact.
    type State = Vec<(usize, bool)>;
    let better = |new: (usize, usize), old: (usize, usize)| new.0 < old.0 || (new.0 == old.0 && new.1 > old.1);
    let mut states: HashMap<State, (usize, usize)> = HashMap::from([(Vec::new(), (0, 0))]);
    for &(pos, side) in &unmatched {
        let mut next: HashMap<State, (usize, usize)> = HashMap::new();
        let mut offer = |state: State, value: (usize, usize)| match next.get(&state) {
            Some(&old) if !better(value, old) => {}
            _ => {
                next.insert(state, value);
            }
        };
        for (pending, (cost, transpositions)) in states {
            let (alive, expired): (State, State) = pending.into_iter().partition(|&(p, _)| pos - p < window);
            let cost = cost + expired.len() * window;
            for (i, &(p, s)) in alive.iter().enumerate() {
                if s != side {
                    let mut rest = alive.clone();
                    rest.remove(i);
                    offer(rest, (cost + (pos - p), transpositions + 1));
                }
            }
            let mut kept = alive;
            kept.push((pos, side));
            offer(kept, (cost, transpositions));
        }
        states = next;
    }
    let (cost, transpositions) = states
        .into_iter()
        .map(|(pending, (cost, t))| (cost + pending.len() * window, t))
        .reduce(|best, candidate| if better(candidate, best) { candidate } else { best })
        .unwrap_or((0, 0));
    let additions = unmatched.len() - 2 * transpositions;
    let offsets = cost - additions * window;
    Ok(BoundaryEdit { matches, additions, transpositions, transposition_cost: offsets as f64 / window as f64 })
}

/// Boundary similarity of two span lists, before chance correction.
pub fn boundary_similarity(
    spans_a: &[(usize, usize)],
    spans_b: &[(usize, usize)],
    length: usize,
    window: usize,
) -> Result<f64, MetricsError> {
    let a = spans_to_boundaries(spans_a, length)?;
    let b = spans_to_boundaries(spans_b, length)?;
    Ok(boundary_edit(&a, &b, window)?.similarity())
}

/// Chance-corrected boundary agreement between two annotators.
pub fn segmentation_agreement(
    spans_a: &[(usize, usize)],
    spans_b: &[(usize, usize)],
    length: usize,
    window: usize,
) -> Result<f64, MetricsError> {
    let a = spans_to_boundaries(spans_a, length)?;
    let b = spans_to_boundaries(spans_b, length)?;
    let observed = boundary_edit(&a, &b, window)?.similarity();
    let positions = (length + 1) as f64;
    let (pa, pb) = (a.len() as f64 / positions, b.len() as f64 / positions);
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    if expected >= 1.0 {
        return Ok(if observed >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((observed - expected) / (1.0 - expected))
}

/// Mean agreement over all annotator pairs; `None` with fewer than two annotators.
pub fn pairwise_segmentation_agreement(
    annotators: &[Vec<(usize, usize)>],
    length: usize,
    window: usize,
) -> Result<Option<f64>, MetricsError> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..annotators.len() {
        for j in i + 1..annotators.len() {
            total += segmentation_agreement(&annotators[i], &annotators[j], length, window)?;
            pairs += 1;
        }
    }
    Ok((pairs > 0).then(|| total / pairs as f64))
}
