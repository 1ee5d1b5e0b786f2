//! Scoring, agreement and corpus statistics.

mod alpha;
mod prf;
mod segmentation;
mod stats;

pub use alpha::{krippendorff_alpha, AlphaOutcome, ReliabilityMatrix};
pub use prf::{selection_prf, tagging_prf, Prf};
pub use segmentation::{
    boundary_edit, boundary_similarity, pairwise_segmentation_agreement, segmentation_agreement, spans_to_boundaries,
    BoundaryEdit, DEFAULT_WINDOW,
};
pub use stats::{corpus_statistics, HalfSplit, ItemStats, StatsReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("candidate `{0}` is not part of the candidate universe")]
    UnknownCandidate(String),
    #[error("sentence {sentence}: {message}")]
    Alignment { sentence: String, message: String },
    #[error("reliability matrix has no item with two or more values")]
    InsufficientData,
    #[error("span {start}..{end} outside [0, {length})")]
    SpanOutOfRange { start: usize, end: usize, length: usize },
    #[error("transposition window must be at least 1")]
    BadWindow,
}
