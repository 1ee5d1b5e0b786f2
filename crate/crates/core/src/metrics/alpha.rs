use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Items x annotators grid of nominal values; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReliabilityMatrix<V> {
    items: Vec<Vec<Option<V>>>,
}

impl<V: Ord + Clone> ReliabilityMatrix<V> {
    /// Rows are items, one slot per annotator.
    pub fn new(items: Vec<Vec<Option<V>>>) -> Result<Self, MetricsError> {
        let pairable = items.iter().any(|row| row.iter().flatten().count() >= 2);
        if !pairable {
            return Err(MetricsError::InsufficientData);
        }
        Ok(Self { items })
    }

    /// Builds the grid from fully observed rows.
    pub fn complete(items: Vec<Vec<V>>) -> Result<Self, MetricsError> {
        Self::new(items.into_iter().map(|row| row.into_iter().map(Some).collect()).collect())
    }

    pub fn items(&self) -> &[Vec<Option<V>>] {
        &self.items
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "alpha", rename_all = "snake_case")]
pub enum AlphaOutcome {
    Score(f64),
    /// Every pairable value is the same category; alpha is undefined.
    NoVariation,
}

impl AlphaOutcome {
    pub fn score(self) -> Option<f64> {
        match self {
            Self::Score(a) => Some(a),
            Self::NoVariation => None,
        }
    }
}

/// Nominal Krippendorff's alpha from the coincidence matrix.
///
/// Items with fewer than two values are not pairable and drop out.
pub fn krippendorff_alpha<V: Ord + Clone>(matrix: &ReliabilityMatrix<V>) -> Result<AlphaOutcome, MetricsError> {
    let mut categories: BTreeMap<&V, usize> = BTreeMap::new();
    for value in matrix.items.iter().flatten().flatten() {
        let next = categories.len();
        categories.entry(value).or_insert(next);
    }
    let k = categories.len();
    let mut coincidence = vec![vec![0.0f64; k]; k];
    for row in &matrix.items {
        let mut counts = vec![0usize; k];
        for value in row.iter().flatten() {
            counts[categories[value]] += 1;
        }
        let m: usize = counts.iter().sum();
        if m < 2 {
            continue;
        }
        let weight = 1.0 / (m - 1) as f64;
        for c in 0..k {
            for d in 0..k {
                let pairs = if c == d { counts[c] * counts[c].saturating_sub(1) } else { counts[c] * counts[d] };
                coincidence[c][d] += pairs as f64 * weight;
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(MetricsError::InsufficientData);
    }
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += coincidence[c][d];
                expected += marginals[c] * marginals[d];
            }
        }
    }
    let observed = observed / n;
    let expected = expected / (n * (n - 1.0));
    if expected == 0.0 {
        return Ok(AlphaOutcome::NoVariation);
    }
    Ok(AlphaOutcome::Score(1.0 - observed / expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let m = ReliabilityMatrix::complete(vec![vec![1, 1], vec![0, 0], vec![1, 0], vec![0, 0]]).unwrap();
        let alpha = krippendorff_alpha(&m).unwrap().score().unwrap();
        // D_o = 2/8, D_e = 2*5*3/(8*7)
        let expected = 1.0 - 0.25 / (30.0 / 56.0);
        assert!((alpha - expected).abs() < 1e-12);
        assert!((alpha - 0.533).abs() < 0.001);
    }

    #[test]
    fn perfect_agreement_is_exactly_one() {
        let m =
            ReliabilityMatrix::complete(vec![vec!["a", "a", "a"], vec!["b", "b", "b"], vec!["a", "a", "a"]]).unwrap();
        assert_eq!(krippendorff_alpha(&m).unwrap(), AlphaOutcome::Score(1.0));
    }

    #[test]
    fn constant_values_have_no_variation() {
        let m = ReliabilityMatrix::complete(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(krippendorff_alpha(&m).unwrap(), AlphaOutcome::NoVariation);
    }

    #[test]
    fn unpairable_items_are_skipped() {
        let with_missing = ReliabilityMatrix::new(vec![
            vec![Some(1), Some(1)],
            vec![Some(0), Some(0)],
            vec![Some(1), Some(0)],
            vec![Some(0), Some(0)],
            vec![Some(1), None],
        ])
        .unwrap();
        let base = ReliabilityMatrix::complete(vec![vec![1, 1], vec![0, 0], vec![1, 0], vec![0, 0]]).unwrap();
        assert_eq!(krippendorff_alpha(&with_missing).unwrap(), krippendorff_alpha(&base).unwrap());
    }

    #[test]
    fn matrix_needs_a_pairable_item() {
        assert_eq!(
            ReliabilityMatrix::new(vec![vec![Some(1), None], vec![None, Some(0)]]).unwrap_err(),
            MetricsError::InsufficientData
        );
    }
}
