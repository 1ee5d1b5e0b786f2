//! The parsed corpus: narratives, sentences and dependency-annotated tokens,
//! plus the gold annotation records attached to them.
//!
//! Character offsets (`char_start`, `char_end`) everywhere in this crate count
//! Unicode scalar values, not bytes, and are half-open.

mod backup;
mod conllu;
mod gold;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use backup::{reserve_backup, BackupCounts};
pub use conllu::{parse_conllu, write_conllu, NarrativeMetadata};
pub use gold::{load_gold, GoldIndex, GoldRecord, TextSpan};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("narrative {narrative_id}, sentence {position}: {message}")]
    Structure { narrative_id: String, position: usize, message: String },
    #[error("narrative {0} has no split (add a `# split = ...` comment or a metadata entry)")]
    MissingSplit(String),
    #[error("duplicate narrative id {0}")]
    DuplicateNarrative(String),
    #[error("split {split}: requested {requested} backup narratives but only {available} available")]
    BackupCount { split: Split, requested: usize, available: usize },
    #[error("gold record {record}: {message}")]
    Integrity { record: usize, message: String },
    #[error("gold record {record}: {message}")]
    Reference { record: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "dev" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// A word of a sentence with its dependency attachment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub upos: String,
    /// Index of the governing token; 0 marks the root.
    pub head: usize,
    pub deprel: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl Token {
    pub fn is_punct(&self) -> bool {
        self.upos == "PUNCT"
    }

    /// Universal relation without its subtype (`obl:tmod` -> `obl`).
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or(&self.deprel)
    }
}

/// Identifies a sentence across the corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub narrative_id: String,
    pub position: usize,
}

impl SentenceKey {
    pub fn new(narrative_id: impl Into<String>, position: usize) -> Self {
        Self { narrative_id: narrative_id.into(), position }
    }
}

impl fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.narrative_id, self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub narrative_id: String,
    /// 0-based position in the narrative.
    pub position: usize,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey::new(self.narrative_id.clone(), self.position)
    }

    /// Builds a sentence from `(surface, upos, head, deprel)` rows, joining the
    /// surfaces with single spaces. Lemmas are the lowercased surfaces.
    pub fn from_rows(
        narrative_id: impl Into<String>,
        position: usize,
        rows: &[(&str, &str, usize, &str)],
    ) -> Result<Self, CorpusError> {
        let mut text = String::new();
        let mut tokens = Vec::with_capacity(rows.len());
        for (i, &(surface, upos, head, deprel)) in rows.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            let char_start = text.chars().count();
            text.push_str(surface);
            tokens.push(Token {
                index: i + 1,
                surface: surface.to_string(),
                lemma: surface.to_lowercase(),
                upos: upos.to_string(),
                head,
                deprel: deprel.to_string(),
                char_start,
                char_end: char_start + surface.chars().count(),
            });
        }
        let sentence = Sentence { narrative_id: narrative_id.into(), position, text, tokens };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by its 1-based index.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    /// Children of every token, indexed by head (slot 0 holds the root's dependents).
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len() + 1];
        for token in &self.tokens {
            children[token.head].push(token.index);
        }
        children
    }

    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().find(|t| t.head == 0).map(|t| t.index)
    }

    /// Character length of the sentence text.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring by character offsets, `None` when out of range.
    pub fn slice(&self, char_start: usize, char_end: usize) -> Option<&str> {
        char_slice(&self.text, char_start, char_end)
    }

    /// Checks token numbering, tree shape and character offsets.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |message: String| CorpusError::Structure {
            narrative_id: self.narrative_id.clone(),
            position: self.position,
            message,
        };
        let n = self.tokens.len();
        for (i, token) in self.tokens.iter().enumerate() {
            if token.index != i + 1 {
                return Err(fail(format!("token ids are not contiguous at id {}", token.index)));
            }
            if token.head > n {
                return Err(fail(format!(
                    "token {} has head {} outside the sentence of {n} tokens",
                    token.index, token.head
                )));
            }
            if token.head == token.index {
                return Err(fail(format!("token {} is its own head", token.index)));
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if n > 0 && roots != 1 {
            return Err(fail(format!("expected exactly one root, found {roots}")));
        }
        for token in &self.tokens {
            let mut current = token.index;
            let mut steps = 0;
            while current != 0 {
                current = self.tokens[current - 1].head;
                steps += 1;
                if steps > n {
                    return Err(fail(format!("cyclic head links through token {}", token.index)));
                }
            }
        }
        let mut previous_end = 0;
        for token in &self.tokens {
            if token.char_start >= token.char_end || token.char_start < previous_end {
                return Err(fail(format!("token {} has invalid character offsets", token.index)));
            }
            if self.slice(token.char_start, token.char_end) != Some(token.surface.as_str()) {
                return Err(fail(format!(
                    "token {} surface `{}` does not match the sentence text at {}..{}",
                    token.index, token.surface, token.char_start, token.char_end
                )));
            }
            previous_end = token.char_end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narrative {
    pub id: String,
    pub narrator_id: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
    #[serde(default)]
    pub is_backup: bool,
}

impl Narrative {
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (i, sentence) in self.sentences.iter().enumerate() {
            if sentence.position != i || sentence.narrative_id != self.id {
                return Err(CorpusError::Structure {
                    narrative_id: self.id.clone(),
                    position: i,
                    message: format!(
                        "sentence recorded as {}#{} out of place",
                        sentence.narrative_id, sentence.position
                    ),
                });
            }
            sentence.validate()?;
        }
        Ok(())
    }
}

/// An immutable corpus with lookup by narrative id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    narratives: Vec<Narrative>,
    by_id: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.narratives == other.narratives
    }
}

impl Corpus {
    /// Builds a corpus, validating every narrative.
    pub fn new(narratives: Vec<Narrative>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(narratives.len());
        for (i, narrative) in narratives.iter().enumerate() {
            narrative.validate()?;
            if by_id.insert(narrative.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateNarrative(narrative.id.clone()));
            }
        }
        Ok(Self { narratives, by_id })
    }

    pub fn narratives(&self) -> &[Narrative] {
        &self.narratives
    }

    pub fn into_narratives(self) -> Vec<Narrative> {
        self.narratives
    }

    pub fn len(&self) -> usize {
        self.narratives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.narratives.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Narrative> {
        self.by_id.get(id).map(|&i| &self.narratives[i])
    }

    pub fn sentence(&self, key: &SentenceKey) -> Option<&Sentence> {
        self.get(&key.narrative_id)?.sentences.get(key.position)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.narratives.iter().flat_map(|n| n.sentences.iter())
    }

    pub fn split_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for narrative in &self.narratives {
            counts[narrative.split as usize] += 1;
        }
        counts
    }
}

/// Substring of `text` between character offsets.
pub fn char_slice(text: &str, char_start: usize, char_end: usize) -> Option<&str> {
    if char_start > char_end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = indices.nth(char_start)?;
    let end = if char_end == char_start { start } else { indices.nth(char_end - char_start - 1)? };
    Some(&text[start..end])
}
