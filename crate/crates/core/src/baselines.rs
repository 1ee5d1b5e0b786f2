//! Rule-based baselines: candidate selectors and token taggers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sentence, SentenceKey};
use crate::extract::EventCandidate;
use crate::rng::keyed_rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("unknown strategy `{0}`")]
    Unknown(String),
    #[error("strategy `{0}` is randomized and needs an explicit seed")]
    MissingSeed(String),
    #[error("strategy `{0}` is deterministic and takes no seed")]
    UnexpectedSeed(String),
}

/// Candidate-selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorStrategy {
    /// One candidate per non-empty sentence, uniformly.
    Random {
        seed: u64,
    },
    /// Each candidate kept independently with probability 0.5.
    Binary {
        seed: u64,
    },
    First,
    Last,
    /// Each candidate whose subject has not been seen earlier in the narrative.
    NewSubject,
    /// Each candidate bringing an unseen subject or an unseen object.
    NewEntity,
}

impl SelectorStrategy {
    pub const NAMES: [&'static str; 6] = ["random", "binary", "first", "last", "new_subject", "new_entity"];

    /// Builds a strategy from its name, enforcing that exactly the randomized
    /// kinds receive a seed.
    pub fn from_parts(kind: &str, seed: Option<u64>) -> Result<Self, StrategyError> {
        let randomized = |make: fn(u64) -> Self| seed.map(make).ok_or_else(|| StrategyError::MissingSeed(kind.into()));
        let fixed = |s: Self| match seed {
            None => Ok(s),
            Some(_) => Err(StrategyError::UnexpectedSeed(kind.into())),
        };
        match kind {
            "random" => randomized(|seed| Self::Random { seed }),
            "binary" => randomized(|seed| Self::Binary { seed }),
            "first" => fixed(Self::First),
            "last" => fixed(Self::Last),
            "new_subject" | "new-subject" => fixed(Self::NewSubject),
            "new_entity" | "new-entity" => fixed(Self::NewEntity),
            other => Err(StrategyError::Unknown(other.into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::Binary { .. } => "binary",
            Self::First => "first",
            Self::Last => "last",
            Self::NewSubject => "new_subject",
            Self::NewEntity => "new_entity",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Random { seed } | Self::Binary { seed } => Some(*seed),
            _ => None,
        }
    }
}

impl fmt::Display for SelectorStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const LEADING_FUNCTION_WORDS: &[&str] =
    &["a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our", "their"];

/// Comparison form of an entity mention: lowercased, leading determiners and
/// possessive pronouns removed.
pub fn normalize_entity(text: &str) -> String {
    let lowered = text.to_lowercase();
    let mut words: &[&str] = &lowered.split_whitespace().collect::<Vec<_>>();
    while words.len() > 1 && LEADING_FUNCTION_WORDS.contains(&words[0]) {
        words = &words[1..];
    }
    words.join(" ")
}

/// Runs a selector over one narrative's per-sentence candidate lists (in
/// narrative order) and returns the selected ids per sentence.
///
/// Randomized strategies draw from a stream keyed by `narrative_id`, so
/// results do not depend on the order narratives are processed in.
pub fn select_candidates(
    strategy: SelectorStrategy,
    narrative_id: &str,
    sentences: &[&[EventCandidate]],
) -> Vec<Vec<String>> {
    let ids = |list: &[&EventCandidate]| list.iter().map(|c| c.id.clone()).collect::<Vec<_>>();
    match strategy {
        SelectorStrategy::Random { seed } => {
            let mut rng = keyed_rng(seed, narrative_id);
            sentences
                .iter()
                .map(
                    |list| {
                        if list.is_empty() {
                            Vec::new()
                        } else {
                            vec![list[rng.random_range(0..list.len())].id.clone()]
                        }
                    },
                )
                .collect()
        }
        SelectorStrategy::Binary { seed } => {
            let mut rng = keyed_rng(seed, narrative_id);
            sentences
                .iter()
                .map(|list| list.iter().filter(|_| rng.random_bool(0.5)).map(|c| c.id.clone()).collect())
                .collect()
        }
        SelectorStrategy::First => {
            sentences.iter().map(|l| l.first().map(|c| vec![c.id.clone()]).unwrap_or_default()).collect()
        }
        SelectorStrategy::Last => {
            sentences.iter().map(|l| l.last().map(|c| vec![c.id.clone()]).unwrap_or_default()).collect()
        }
        SelectorStrategy::NewSubject => {
            let mut seen = HashSet::new();
            sentences
                .iter()
                .map(|list| {
                    let picked: Vec<&EventCandidate> =
                        list.iter().filter(|c| seen.insert(normalize_entity(&c.subject.text))).collect();
                    ids(&picked)
                })
                .collect()
        }
        SelectorStrategy::NewEntity => {
            let mut subjects = HashSet::new();
            let mut objects = HashSet::new();
            sentences
                .iter()
                .map(|list| {
                    let picked: Vec<&EventCandidate> = list
                        .iter()
                        .filter(|c| {
                            let new_subject = subjects.insert(normalize_entity(&c.subject.text));
                            let new_object =
                                c.object.as_ref().is_some_and(|o| objects.insert(normalize_entity(&o.text)));
                            // a verb-only variant of an earlier candidate has both
                            // entities already seen, so only the earliest survives
                            new_subject || new_object
                        })
                        .collect();
                    ids(&picked)
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    E,
    O,
}

impl Tag {
    pub fn is_event(self) -> bool {
        self == Tag::E
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub key: SentenceKey,
    pub tags: Vec<Tag>,
}

impl TagSequence {
    pub fn event_count(&self) -> usize {
        self.tags.iter().filter(|t| t.is_event()).count()
    }
}

/// Token-tagging strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaggerStrategy {
    /// Each token tagged E with probability 0.5.
    Random { seed: u64 },
    /// The first 30% of the tokens.
    Early,
    /// The last 30% of the tokens.
    Late,
}

impl TaggerStrategy {
    pub const NAMES: [&'static str; 3] = ["random", "early", "late"];

    pub fn from_parts(kind: &str, seed: Option<u64>) -> Result<Self, StrategyError> {
        match (kind, seed) {
            ("random", Some(seed)) => Ok(Self::Random { seed }),
            ("random", None) => Err(StrategyError::MissingSeed(kind.into())),
            ("early" | "late", Some(_)) => Err(StrategyError::UnexpectedSeed(kind.into())),
            ("early", None) => Ok(Self::Early),
            ("late", None) => Ok(Self::Late),
            (other, _) => Err(StrategyError::Unknown(other.into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random { .. } => "random",
            Self::Early => "early",
            Self::Late => "late",
        }
    }
}

impl FromStr for TaggerStrategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_parts(s, None)
    }
}

/// Number of tokens the positional taggers mark: `max(1, floor(0.3 n))`.
pub fn positional_width(n: usize) -> usize {
    (3 * n / 10).max(1)
}

pub fn tag_tokens(strategy: TaggerStrategy, sentence: &Sentence) -> TagSequence {
    let n = sentence.len();
    let tags = match strategy {
        TaggerStrategy::Random { seed } => {
            let mut rng = keyed_rng(seed, &sentence.key().to_string());
            (0..n).map(|_| if rng.random_bool(0.5) { Tag::E } else { Tag::O }).collect()
        }
        TaggerStrategy::Early => {
            let m = positional_width(n).min(n);
            (0..n).map(|i| if i < m { Tag::E } else { Tag::O }).collect()
        }
        TaggerStrategy::Late => {
            let m = positional_width(n).min(n);
            (0..n).map(|i| if i >= n - m { Tag::E } else { Tag::O }).collect()
        }
    };
    TagSequence { key: sentence.key(), tags }
}
