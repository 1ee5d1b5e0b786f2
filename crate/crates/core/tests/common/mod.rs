#![allow(dead_code)]

use newevent_core::corpus::{Corpus, GoldRecord, Narrative, Sentence, Split, TextSpan};
use newevent_core::extract::CandidateIndex;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Row<'a> = (&'a str, &'a str, usize, &'a str);

/// "Yesterday I met my teammates at the park"
pub const MET: &[Row] = &[
    ("Yesterday", "ADV", 3, "advmod"),
    ("I", "PRON", 3, "nsubj"),
    ("met", "VERB", 0, "root"),
    ("my", "PRON", 5, "nmod:poss"),
    ("teammates", "NOUN", 3, "obj"),
    ("at", "ADP", 8, "case"),
    ("the", "DET", 8, "det"),
    ("park", "NOUN", 3, "obl"),
];

/// "We played football"
pub const PLAYED: &[Row] = &[("We", "PRON", 2, "nsubj"), ("played", "VERB", 0, "root"), ("football", "NOUN", 2, "obj")];

/// "Then we went home"
pub const WENT: &[Row] = &[
    ("Then", "ADV", 3, "advmod"),
    ("we", "PRON", 3, "nsubj"),
    ("went", "VERB", 0, "root"),
    ("home", "ADV", 3, "advmod"),
];

pub fn narrative(id: &str, narrator: &str, split: Split, sentences: &[&[Row]]) -> Narrative {
    Narrative {
        id: id.into(),
        narrator_id: narrator.into(),
        split,
        sentences: sentences.iter().enumerate().map(|(i, rows)| Sentence::from_rows(id, i, rows).unwrap()).collect(),
        is_backup: false,
    }
}

/// Three three-sentence narratives from three narrators.
pub fn fixture_corpus() -> Corpus {
    Corpus::new(
        ["n1", "n2", "n3"]
            .iter()
            .enumerate()
            .map(|(i, id)| narrative(id, &format!("p{}", i + 1), Split::Train, &[MET, PLAYED, WENT]))
            .collect(),
    )
    .unwrap()
}

pub fn record(nid: &str, position: usize, selected: &[&str], spans: &[(usize, usize, &str)]) -> GoldRecord {
    GoldRecord {
        narrative_id: nid.into(),
        sentence_position: position,
        selected_candidates: selected.iter().map(|s| s.to_string()).collect(),
        added_spans: spans.iter().map(|&(a, b, t)| TextSpan::new(a, b, t)).collect(),
        annotator_id: "gold".into(),
    }
}

const SUBJECTS: &[(&str, &str)] = &[
    ("I", "PRON"),
    ("We", "PRON"),
    ("She", "PRON"),
    ("He", "PRON"),
    ("My sister", "NOUN"),
    ("The manager", "NOUN"),
    ("Our team", "NOUN"),
    ("My best friend", "NOUN"),
    ("Tom", "PROPN"),
];
const TRANSITIVE: &[&str] = &["met", "visited", "called", "bought", "found", "painted", "cooked", "watched", "lost"];
const INTRANSITIVE: &[&str] = &["left", "arrived", "cried", "laughed", "slept", "waited"];
const OBJECTS: &[&str] =
    &["the dog", "a cake", "my parents", "the house", "an old friend", "the tickets", "a letter", "the car"];
const OBLIQUES: &[&str] = &["at the park", "in the morning", "with my uncle", "after work", "for hours"];
const ADJECTIVES: &[&str] = &["happy", "tired", "late", "excited", "nervous"];

#[derive(Default)]
struct Rows(Vec<(String, &'static str, usize, &'static str)>);

impl Rows {
    fn push(&mut self, word: &str, upos: &'static str, head: usize, rel: &'static str) -> usize {
        self.0.push((word.to_string(), upos, head, rel));
        self.0.len()
    }

    /// Pushes a phrase whose last word is the head; returns the head index.
    fn phrase(&mut self, text: &str, upos: &'static str, head: usize, rel: &'static str) -> usize {
        let words: Vec<&str> = text.split(' ').collect();
        let h = self.0.len() + words.len();
        for (i, word) in words.iter().enumerate() {
            if i + 1 == words.len() {
                self.push(word, upos, head, rel);
            } else if ["at", "in", "with", "after", "for"].contains(word) {
                self.push(word, "ADP", h, "case");
            } else {
                self.push(word, "DET", h, "det");
            }
        }
        h
    }

    fn attach(&mut self, index: usize, head: usize) {
        self.0[index - 1].2 = head;
    }
}

pub fn synthetic_sentence(rng: &mut impl Rng, narrative_id: &str, position: usize) -> Sentence {
    let mut rows = Rows::default();
    let &(subject, subject_upos) = SUBJECTS.choose(rng).unwrap();
    let s = rows.phrase(subject, subject_upos, 0, "nsubj");
    match rng.random_range(0..5) {
        0 => {
            let v = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", 0, "root");
            rows.attach(s, v);
            rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", v, "obj");
            if rng.random_bool(0.5) {
                rows.phrase(OBLIQUES.choose(rng).unwrap(), "NOUN", v, "obl");
            }
            rows.push(".", "PUNCT", v, "punct");
        }
        1 => {
            let v = rows.push(INTRANSITIVE.choose(rng).unwrap(), "VERB", 0, "root");
            rows.attach(s, v);
            if rng.random_bool(0.5) {
                rows.phrase(OBLIQUES.choose(rng).unwrap(), "NOUN", v, "obl");
            }
            rows.push(".", "PUNCT", v, "punct");
        }
        2 => {
            let v = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", 0, "root");
            rows.attach(s, v);
            rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", v, "obj");
            let cc = rows.push("and", "CCONJ", 0, "cc");
            let v2 = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", v, "conj");
            rows.attach(cc, v2);
            rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", v2, "obj");
            rows.push(".", "PUNCT", v, "punct");
        }
        3 => {
            let cop = rows.push("was", "AUX", 0, "cop");
            let adj = rows.push(ADJECTIVES.choose(rng).unwrap(), "ADJ", 0, "root");
            rows.attach(s, adj);
            rows.attach(cop, adj);
            rows.push(".", "PUNCT", adj, "punct");
        }
        _ => {
            let aux = rows.push("did", "AUX", 0, "aux");
            let neg = rows.push("not", "PART", 0, "advmod");
            let v = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", 0, "root");
            for i in [s, aux, neg] {
                rows.attach(i, v);
            }
            rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", v, "obj");
            rows.push(".", "PUNCT", v, "punct");
        }
    }
    let borrowed: Vec<Row> = rows.0.iter().map(|(w, u, h, r)| (w.as_str(), *u, *h, *r)).collect();
    let mut sentence = Sentence::from_rows(narrative_id, position, &borrowed).unwrap();
    // Attach the final full stop directly to the preceding word, as in real text.
    detach_full_stop(&mut sentence);
    sentence
}

/// One subject followed by `clauses` conjoined transitive clauses, so the
/// sentence yields roughly one candidate per clause (more with obliques).
pub fn conjoined_sentence(rng: &mut impl Rng, narrative_id: &str, position: usize, clauses: usize) -> Sentence {
    let mut rows = Rows::default();
    let &(subject, subject_upos) = SUBJECTS.choose(rng).unwrap();
    let s = rows.phrase(subject, subject_upos, 0, "nsubj");
    let root = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", 0, "root");
    rows.attach(s, root);
    rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", root, "obj");
    for _ in 1..clauses.max(1) {
        let cc = rows.push("and", "CCONJ", 0, "cc");
        let v = rows.push(TRANSITIVE.choose(rng).unwrap(), "VERB", root, "conj");
        rows.attach(cc, v);
        rows.phrase(OBJECTS.choose(rng).unwrap(), "NOUN", v, "obj");
        if rng.random_bool(0.3) {
            rows.phrase(OBLIQUES.choose(rng).unwrap(), "NOUN", v, "obl");
        }
    }
    rows.push(".", "PUNCT", root, "punct");
    let borrowed: Vec<Row> = rows.0.iter().map(|(w, u, h, r)| (w.as_str(), *u, *h, *r)).collect();
    let mut sentence = Sentence::from_rows(narrative_id, position, &borrowed).unwrap();
    detach_full_stop(&mut sentence);
    sentence
}

fn detach_full_stop(sentence: &mut Sentence) {
    let n = sentence.tokens.len();
    if n >= 2 && sentence.tokens[n - 1].surface == "." {
        sentence.text = sentence.text[..sentence.text.len() - 2].to_string() + ".";
        let token = &mut sentence.tokens[n - 1];
        token.char_start -= 1;
        token.char_end -= 1;
    }
}

/// A seeded corpus shaped like a small personal-narrative collection.
pub fn synthetic_corpus(narratives: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let splits = [Split::Train, Split::Train, Split::Train, Split::Valid, Split::Test];
    let list = (0..narratives)
        .map(|i| {
            let id = format!("syn{i:04}");
            let length = rng.random_range(4..=16);
            Narrative {
                id: id.clone(),
                narrator_id: format!("narrator{}", i % (narratives / 3).max(1)),
                split: splits[i % splits.len()],
                sentences: (0..length).map(|p| synthetic_sentence(&mut rng, &id, p)).collect(),
                is_backup: false,
            }
        })
        .collect();
    Corpus::new(list).unwrap()
}

/// Seeded gold: each presented candidate is chosen with probability 0.3 and
/// a sentence receives an added span over a random token run with
/// probability 0.2.
pub fn synthetic_gold(corpus: &Corpus, candidates: &CandidateIndex, seed: u64) -> Vec<GoldRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for sentence in corpus.sentences() {
        let key = sentence.key();
        let selected = candidates.get(&key).iter().filter(|_| rng.random_bool(0.3)).map(|c| c.rendered()).collect();
        let mut added_spans = Vec::new();
        if rng.random_bool(0.2) && !sentence.is_empty() {
            let a = rng.random_range(0..sentence.len());
            let b = rng.random_range(a..sentence.len());
            let (start, end) = (sentence.tokens[a].char_start, sentence.tokens[b].char_end);
            added_spans.push(TextSpan::new(start, end, sentence.slice(start, end).unwrap()));
        }
        out.push(GoldRecord {
            narrative_id: key.narrative_id.clone(),
            sentence_position: key.position,
            selected_candidates: selected,
            added_spans,
            annotator_id: "synthetic".into(),
        });
    }
    out
}
