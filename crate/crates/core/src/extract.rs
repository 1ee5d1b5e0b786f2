//! Event-candidate extraction from dependency trees.
//!
//! A candidate is a (subject, predicate, object) triplet anchored on a verb,
//! or on a nominal/adjectival head carrying a `cop` dependent. Relations:
//!
//! * subjects: `nsubj`, `nsubj:pass`; a conjoined predicate without its own
//!   subject inherits the subjects of its conjunction head;
//! * object-like: `obj`, `iobj`, `obl` and its subtypes, one candidate per
//!   subject x object pair, or a single intransitive candidate when the
//!   predicate has none;
//! * predicate span: the head plus its `aux`, `aux:pass`, `compound:prt` and
//!   negation dependents;
//! * argument spans: the dependency subtree of the argument head without
//!   clausal (`acl`, `advcl`, `ccomp`, `xcomp`) subtrees and punctuation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Narrative, Sentence, SentenceKey, Token};

/// Separator between the parts of a rendered triplet.
pub const TRIPLET_SEPARATOR: &str = " — ";

/// Token indices (1-based, ascending) plus their rendered text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentSpan {
    pub tokens: Vec<usize>,
    pub text: String,
}

impl ArgumentSpan {
    fn from_tokens(sentence: &Sentence, mut tokens: Vec<usize>) -> Self {
        tokens.sort_unstable();
        tokens.dedup();
        let text = render_tokens(sentence, &tokens);
        Self { tokens, text }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Smallest token index, the span's position in the sentence.
    pub fn start(&self) -> usize {
        self.tokens.first().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCandidate {
    pub id: String,
    pub narrative_id: String,
    pub sentence_position: usize,
    pub subject: ArgumentSpan,
    pub predicate: ArgumentSpan,
    /// `None` for intransitive candidates.
    pub object: Option<ArgumentSpan>,
    /// Index of the predicate head token.
    pub order_key: usize,
    /// Set when the sentence's list was capped by clustering.
    #[serde(default)]
    pub reduced: bool,
}

impl EventCandidate {
    pub fn key(&self) -> SentenceKey {
        SentenceKey::new(self.narrative_id.clone(), self.sentence_position)
    }

    /// Total number of tokens over the three spans.
    pub fn token_count(&self) -> usize {
        self.subject.len() + self.predicate.len() + self.object.as_ref().map_or(0, ArgumentSpan::len)
    }

    /// Smallest token index touched by any of the spans.
    pub fn start_token(&self) -> usize {
        let mut start = self.subject.start().min(self.predicate.start());
        if let Some(object) = &self.object {
            start = start.min(object.start());
        }
        start
    }

    /// All token indices of the three spans, ascending.
    pub fn all_tokens(&self) -> Vec<usize> {
        let mut tokens: Vec<usize> = self
            .subject
            .tokens
            .iter()
            .chain(&self.predicate.tokens)
            .chain(self.object.iter().flat_map(|o| o.tokens.iter()))
            .copied()
            .collect();
        tokens.sort_unstable();
        tokens.dedup();
        tokens
    }

    pub fn rendered(&self) -> String {
        render_triplet(self)
    }
}

/// `subject — predicate — object`, or `subject — predicate` when intransitive.
pub fn render_triplet(candidate: &EventCandidate) -> String {
    let mut out = format!("{}{TRIPLET_SEPARATOR}{}", candidate.subject.text, candidate.predicate.text);
    if let Some(object) = &candidate.object {
        out.push_str(TRIPLET_SEPARATOR);
        out.push_str(&object.text);
    }
    out
}

/// Inverse of [`render_triplet`].
pub fn split_rendered(rendered: &str) -> Vec<&str> {
    rendered.split(TRIPLET_SEPARATOR).collect()
}

/// Joins token surfaces in index order, with a space wherever the sentence
/// text has a gap between consecutive tokens.
fn render_tokens(sentence: &Sentence, tokens: &[usize]) -> String {
    let mut out = String::new();
    let mut previous_end: Option<usize> = None;
    for &index in tokens {
        let token = sentence.token(index);
        if let Some(end) = previous_end {
            if token.char_start != end {
                out.push(' ');
            }
        }
        out.push_str(&token.surface);
        previous_end = Some(token.char_end);
    }
    out
}

fn is_verbal(token: &Token) -> bool {
    matches!(token.upos.as_str(), "VERB" | "AUX")
}

fn is_subject(token: &Token) -> bool {
    matches!(token.deprel.as_str(), "nsubj" | "nsubj:pass")
}

fn is_object_like(token: &Token) -> bool {
    matches!(token.base_deprel(), "obj" | "iobj" | "obl")
}

fn is_clausal(token: &Token) -> bool {
    matches!(token.base_deprel(), "acl" | "advcl" | "ccomp" | "xcomp")
}

fn is_negation(token: &Token) -> bool {
    if token.deprel == "neg" {
        return true;
    }
    let word = token.surface.to_lowercase();
    matches!(word.as_str(), "not" | "n't" | "never") && (token.base_deprel() == "advmod" || token.upos == "PART")
}

/// Dependents folded into the predicate span.
fn is_predicate_part(token: &Token) -> bool {
    matches!(token.deprel.as_str(), "aux" | "aux:pass" | "compound:prt") || is_negation(token)
}

#[derive(Clone, Copy)]
enum Anchor {
    Verb(usize),
    /// (nominal head, copula)
    Copula(usize, usize),
}

struct Tree<'a> {
    sentence: &'a Sentence,
    children: Vec<Vec<usize>>,
}

impl<'a> Tree<'a> {
    fn new(sentence: &'a Sentence) -> Self {
        Self { sentence, children: sentence.children() }
    }

    fn token(&self, index: usize) -> &'a Token {
        self.sentence.token(index)
    }

    fn children(&self, index: usize) -> impl Iterator<Item = &'a Token> + '_ {
        self.children[index].iter().map(|&c| self.sentence.token(c))
    }

    fn anchor(&self, index: usize) -> Option<Anchor> {
        let token = self.token(index);
        if is_verbal(token) {
            return (!matches!(token.deprel.as_str(), "aux" | "aux:pass" | "cop")).then_some(Anchor::Verb(index));
        }
        self.children(index).find(|c| c.deprel == "cop").map(|cop| Anchor::Copula(index, cop.index))
    }

    fn is_anchor(&self, index: usize) -> bool {
        self.anchor(index).is_some()
    }

    /// Own subjects, or those inherited along a `conj` chain.
    fn subjects(&self, index: usize) -> Vec<usize> {
        let mut current = index;
        // conj chains are bounded by the sentence length since the tree is acyclic
        loop {
            let own: Vec<usize> = self.children(current).filter(|c| is_subject(c)).map(|c| c.index).collect();
            if !own.is_empty() {
                return own;
            }
            let token = self.token(current);
            if token.deprel != "conj" || token.head == 0 {
                return Vec::new();
            }
            current = token.head;
        }
    }

    /// Subtree of `root` without clausal subtrees, punctuation and conjoined predicates.
    fn phrase(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(index) = stack.pop() {
            let token = self.token(index);
            if !token.is_punct() || index == root {
                out.push(index);
            }
            for child in self.children(index) {
                let conj_predicate = child.deprel == "conj" && self.is_anchor(child.index);
                if !is_clausal(child) && !child.is_punct() && !conj_predicate {
                    stack.push(child.index);
                }
            }
        }
        out
    }

    fn predicate_span(&self, head: usize, core: usize) -> Vec<usize> {
        let mut tokens = vec![core];
        tokens.extend(self.children(head).filter(|c| is_predicate_part(c)).map(|c| c.index));
        tokens
    }

    /// The nominal complement of a copular clause: the head's phrase minus
    /// subjects, copula, predicate parts and clause-level dependents.
    fn copular_object(&self, head: usize) -> Vec<usize> {
        let mut tokens = vec![head];
        for child in self.children(head) {
            let excluded = is_subject(child)
                || child.base_deprel() == "csubj"
                || child.deprel == "cop"
                || is_predicate_part(child)
                || matches!(child.base_deprel(), "mark" | "expl" | "parataxis" | "cc")
                || (child.deprel == "conj" && self.is_anchor(child.index))
                || is_clausal(child)
                || child.is_punct();
            if !excluded {
                tokens.extend(self.phrase(child.index));
            }
        }
        tokens
    }
}

/// A phrase head and the token indices of its phrase.
type HeadedPhrase = (usize, Vec<usize>);

/// Extracts the candidates of one sentence, ordered by predicate, subject and
/// object position. Candidate ids are `narrative:position:ordinal`.
pub fn extract_candidates(sentence: &Sentence) -> Vec<EventCandidate> {
    let tree = Tree::new(sentence);
    let mut drafts: Vec<(usize, usize, usize, ArgumentSpan, ArgumentSpan, Option<ArgumentSpan>)> = Vec::new();

    for token in &sentence.tokens {
        let Some(anchor) = tree.anchor(token.index) else {
            continue;
        };
        let subjects = tree.subjects(token.index);
        if subjects.is_empty() {
            continue;
        }
        let (order_key, predicate, objects): (usize, Vec<usize>, Vec<HeadedPhrase>) = match anchor {
            Anchor::Verb(head) => {
                let objects = tree
                    .children(head)
                    .filter(|c| is_object_like(c))
                    .map(|c| (c.index, tree.phrase(c.index)))
                    .collect();
                (head, tree.predicate_span(head, head), objects)
            }
            Anchor::Copula(head, cop) => (cop, tree.predicate_span(head, cop), vec![(head, tree.copular_object(head))]),
        };
        let predicate = ArgumentSpan::from_tokens(sentence, predicate);
        for &subject in &subjects {
            let subject_span = ArgumentSpan::from_tokens(sentence, tree.phrase(subject));
            if objects.is_empty() {
                drafts.push((order_key, subject, 0, subject_span, predicate.clone(), None));
                continue;
            }
            for (object_head, object_tokens) in &objects {
                let object_span = ArgumentSpan::from_tokens(sentence, object_tokens.clone());
                drafts.push((
                    order_key,
                    subject,
                    *object_head,
                    subject_span.clone(),
                    predicate.clone(),
                    Some(object_span),
                ));
            }
        }
    }

    drafts.sort_by_key(|d| (d.0, d.1, d.2));
    drafts
        .into_iter()
        .enumerate()
        .map(|(ordinal, (order_key, _, _, subject, predicate, object))| EventCandidate {
            id: format!("{}:{}:{}", sentence.narrative_id, sentence.position, ordinal),
            narrative_id: sentence.narrative_id.clone(),
            sentence_position: sentence.position,
            subject,
            predicate,
            object,
            order_key,
            reduced: false,
        })
        .collect()
}

/// Per-sentence candidate lists for a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateIndex {
    lists: BTreeMap<SentenceKey, Vec<EventCandidate>>,
}

impl CandidateIndex {
    /// Groups candidates by sentence, keeping their relative order.
    pub fn from_candidates(candidates: impl IntoIterator<Item = EventCandidate>) -> Self {
        let mut lists: BTreeMap<SentenceKey, Vec<EventCandidate>> = BTreeMap::new();
        for candidate in candidates {
            lists.entry(candidate.key()).or_default().push(candidate);
        }
        Self { lists }
    }

    pub fn insert(&mut self, key: SentenceKey, list: Vec<EventCandidate>) {
        if list.is_empty() {
            self.lists.remove(&key);
        } else {
            self.lists.insert(key, list);
        }
    }

    pub fn get(&self, key: &SentenceKey) -> &[EventCandidate] {
        self.lists.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Candidate of a sentence whose rendered triplet equals `text`.
    pub fn find_rendered(&self, key: &SentenceKey, text: &str) -> Option<&EventCandidate> {
        self.get(key).iter().find(|c| c.rendered() == text)
    }

    /// Resolves a sentence's selected texts to candidates, one per text.
    ///
    /// Distinct candidates may render identically, so the n-th repetition of
    /// a text takes the n-th candidate with that rendering. Repetitions beyond
    /// the available candidates fall back to the first one. `None` marks a
    /// text that matches no candidate.
    pub fn resolve_rendered<S: AsRef<str>>(
        &self,
        key: &SentenceKey,
        texts: impl IntoIterator<Item = S>,
    ) -> Vec<(S, Option<&EventCandidate>)> {
        let list = self.get(key);
        let mut taken = vec![false; list.len()];
        texts
            .into_iter()
            .map(|text| {
                let mut matching = list.iter().enumerate().filter(|(_, c)| c.rendered() == text.as_ref());
                let first = matching.clone().next();
                let chosen = matching.find(|(i, _)| !taken[*i]).or(first).map(|(i, c)| {
                    taken[i] = true;
                    c
                });
                (text, chosen)
            })
            .collect()
    }

    pub fn find_id(&self, key: &SentenceKey, id: &str) -> Option<&EventCandidate> {
        self.get(key).iter().find(|c| c.id == id)
    }

    /// The candidate lists of a narrative's sentences, in narrative order.
    pub fn narrative_lists(&self, narrative: &Narrative) -> Vec<&[EventCandidate]> {
        narrative.sentences.iter().map(|s| self.get(&s.key())).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SentenceKey, &Vec<EventCandidate>)> {
        self.lists.iter()
    }

    pub fn candidates(&self) -> impl Iterator<Item = &EventCandidate> {
        self.lists.values().flatten()
    }

    pub fn total(&self) -> usize {
        self.lists.values().map(Vec::len).sum()
    }

    pub fn map_lists(&self, mut f: impl FnMut(&[EventCandidate]) -> Vec<EventCandidate>) -> Self {
        let mut out = Self::default();
        for (key, list) in &self.lists {
            out.insert(key.clone(), f(list));
        }
        out
    }
}

/// Extracts candidates for every sentence of the corpus.
pub fn extract_corpus(corpus: &Corpus) -> CandidateIndex {
    let mut index = CandidateIndex::default();
    for sentence in corpus.sentences() {
        index.insert(sentence.key(), extract_candidates(sentence));
    }
    index
}
