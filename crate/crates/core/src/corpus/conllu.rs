//! CoNLL-U ingestion.
//!
//! Narratives are delimited by `# newdoc id = ...` comments. Document-level
//! comments `# narrator_id = ...` and `# split = ...` may follow the newdoc
//! line; entries in the metadata map take precedence over both. Multiword
//! token ranges (`3-4`) and empty nodes (`5.1`) are not words and are skipped,
//! except that a range's `SpaceAfter=No` governs the spacing after its last
//! word when the sentence text has to be rebuilt.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Narrative, Sentence, Split, Token};

/// Per-narrative metadata supplied alongside the CoNLL-U files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeMetadata {
    pub narrative_id: String,
    #[serde(default)]
    pub split: Option<Split>,
    #[serde(default)]
    pub narrator_id: Option<String>,
}

struct Word {
    index: usize,
    surface: String,
    lemma: String,
    upos: String,
    head: usize,
    deprel: String,
    space_after: bool,
}

#[derive(Default)]
struct Block {
    first_line: usize,
    text: Option<String>,
    words: Vec<Word>,
    // (first id, last id, SpaceAfter of the range)
    ranges: Vec<(usize, usize, bool)>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.words.is_empty() && self.ranges.is_empty()
    }
}

struct Doc {
    id: String,
    narrator_id: Option<String>,
    split: Option<Split>,
    sentences: Vec<Sentence>,
}

/// Parses a CoNLL-U document into narratives.
pub fn parse_conllu(
    document_text: &str,
    metadata: &HashMap<String, NarrativeMetadata>,
) -> Result<Vec<Narrative>, CorpusError> {
    let mut narratives = Vec::new();
    let mut doc: Option<Doc> = None;
    let mut block = Block::default();

    for (i, raw_line) in document_text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush_block(&mut block, doc.as_mut())?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("newdoc") {
                flush_block(&mut block, doc.as_mut())?;
                let id = comment_value(rest, "id").ok_or_else(|| CorpusError::Parse {
                    line: line_no,
                    message: "newdoc comment without an id".into(),
                })?;
                if let Some(finished) = doc.take() {
                    narratives.push(finish_doc(finished, metadata)?);
                }
                doc = Some(Doc { id, narrator_id: None, split: None, sentences: Vec::new() });
            } else if let Some(value) = key_value(comment, "narrator_id") {
                if let Some(d) = doc.as_mut() {
                    d.narrator_id = Some(value);
                }
            } else if let Some(value) = key_value(comment, "split") {
                let split = value.parse::<Split>().map_err(|message| CorpusError::Parse { line: line_no, message })?;
                if let Some(d) = doc.as_mut() {
                    d.split = Some(split);
                }
            } else if let Some(value) = key_value(comment, "text") {
                block.text = Some(value);
            }
            continue;
        }

        if doc.is_none() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "token line before any `# newdoc id = ...` comment".into(),
            });
        }
        if block.is_empty() {
            block.first_line = line_no;
        }
        parse_token_line(line, line_no, &mut block)?;
    }
    flush_block(&mut block, doc.as_mut())?;
    if let Some(finished) = doc.take() {
        narratives.push(finish_doc(finished, metadata)?);
    }
    Ok(narratives)
}

fn comment_value(rest: &str, key: &str) -> Option<String> {
    key_value(rest.trim(), key)
}

/// `key = value` inside a comment body.
fn key_value(comment: &str, key: &str) -> Option<String> {
    let rest = comment.strip_prefix(key)?.trim_start();
    let value = rest.strip_prefix('=')?.trim();
    (!value.is_empty()).then(|| value.to_string())
}

fn parse_token_line(line: &str, line_no: usize, block: &mut Block) -> Result<(), CorpusError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(CorpusError::Parse {
            line: line_no,
            message: format!("expected 10 tab-separated columns, found {}", cols.len()),
        });
    }
    let bad = |message: String| CorpusError::Parse { line: line_no, message };
    let id = cols[0];
    let space_after = !cols[9].split('|').any(|item| item == "SpaceAfter=No");

    if id.contains('.') {
        return Ok(());
    }
    if let Some((start, end)) = id.split_once('-') {
        let start: usize = start.parse().map_err(|_| bad(format!("bad range id `{id}`")))?;
        let end: usize = end.parse().map_err(|_| bad(format!("bad range id `{id}`")))?;
        if start == 0 || end < start {
            return Err(bad(format!("bad range id `{id}`")));
        }
        block.ranges.push((start, end, space_after));
        return Ok(());
    }
    let index: usize = id.parse().map_err(|_| bad(format!("bad token id `{id}`")))?;
    let head: usize =
        cols[6].parse().map_err(|_| bad(format!("token {index}: HEAD `{}` is not an integer", cols[6])))?;
    block.words.push(Word {
        index,
        surface: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        head,
        deprel: cols[7].to_string(),
        space_after,
    });
    Ok(())
}

fn flush_block(block: &mut Block, doc: Option<&mut Doc>) -> Result<(), CorpusError> {
    let taken = std::mem::take(block);
    if taken.is_empty() {
        return Ok(());
    }
    let Some(doc) = doc else {
        return Err(CorpusError::Parse { line: taken.first_line, message: "sentence outside a document".into() });
    };
    if taken.words.is_empty() {
        return Err(CorpusError::Parse { line: taken.first_line, message: "sentence without word lines".into() });
    }
    let sentence = build_sentence(taken, &doc.id, doc.sentences.len())?;
    doc.sentences.push(sentence);
    Ok(())
}

fn build_sentence(block: Block, narrative_id: &str, position: usize) -> Result<Sentence, CorpusError> {
    let Block { text, words, ranges, .. } = block;

    let mut spacing: Vec<bool> = words.iter().map(|w| w.space_after).collect();
    for &(start, end, range_space) in &ranges {
        for (slot, word) in spacing.iter_mut().zip(&words) {
            if word.index >= start && word.index < end {
                *slot = false;
            } else if word.index == end {
                *slot = range_space;
            }
        }
    }

    let surfaces: Vec<&str> = words.iter().map(|w| w.surface.as_str()).collect();
    let (text, offsets) = match text.as_deref().and_then(|t| align(t, &surfaces)) {
        Some(offsets) => (text.unwrap_or_default(), offsets),
        None => rebuild(&surfaces, &spacing),
    };

    let tokens = words
        .into_iter()
        .zip(offsets)
        .map(|(w, (char_start, char_end))| Token {
            index: w.index,
            surface: w.surface,
            lemma: w.lemma,
            upos: w.upos,
            head: w.head,
            deprel: w.deprel,
            char_start,
            char_end,
        })
        .collect();
    let sentence = Sentence { narrative_id: narrative_id.to_string(), position, text, tokens };
    sentence.validate()?;
    Ok(sentence)
}

/// Locates each surface in order inside `text`, allowing only whitespace between them.
fn align(text: &str, surfaces: &[&str]) -> Option<Vec<(usize, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut cursor = 0;
    let mut offsets = Vec::with_capacity(surfaces.len());
    for surface in surfaces {
        while cursor < chars.len() && chars[cursor].is_whitespace() {
            cursor += 1;
        }
        let needle: Vec<char> = surface.chars().collect();
        if needle.is_empty() || chars.get(cursor..cursor + needle.len())? != needle.as_slice() {
            return None;
        }
        offsets.push((cursor, cursor + needle.len()));
        cursor += needle.len();
    }
    Some(offsets)
}

fn rebuild(surfaces: &[&str], spacing: &[bool]) -> (String, Vec<(usize, usize)>) {
    let mut text = String::new();
    let mut offsets = Vec::with_capacity(surfaces.len());
    let mut cursor = 0;
    for (i, surface) in surfaces.iter().enumerate() {
        let len = surface.chars().count();
        text.push_str(surface);
        offsets.push((cursor, cursor + len));
        cursor += len;
        if i + 1 < surfaces.len() && spacing[i] {
            text.push(' ');
            cursor += 1;
        }
    }
    (text, offsets)
}

fn finish_doc(doc: Doc, metadata: &HashMap<String, NarrativeMetadata>) -> Result<Narrative, CorpusError> {
    let meta = metadata.get(&doc.id);
    let split = meta.and_then(|m| m.split).or(doc.split).ok_or_else(|| CorpusError::MissingSplit(doc.id.clone()))?;
    let narrator_id = meta.and_then(|m| m.narrator_id.clone()).or(doc.narrator_id).unwrap_or_else(|| doc.id.clone());
    Ok(Narrative { id: doc.id, narrator_id, split, sentences: doc.sentences, is_backup: false })
}

/// Serializes narratives as CoNLL-U that [`parse_conllu`] reads back into
/// the same narratives. Sentences must have at least one token.
pub fn write_conllu(narratives: &[Narrative]) -> String {
    let mut out = String::new();
    for narrative in narratives {
        out.push_str(&format!(
            "# newdoc id = {}\n# narrator_id = {}\n# split = {}\n",
            narrative.id, narrative.narrator_id, narrative.split
        ));
        for sentence in &narrative.sentences {
            out.push_str(&format!("# sent_id = {}\n# text = {}\n", sentence.key(), sentence.text));
            for (i, token) in sentence.tokens.iter().enumerate() {
                let joined = sentence.tokens.get(i + 1).is_some_and(|next| next.char_start == token.char_end);
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t{}\n",
                    token.index,
                    token.surface,
                    token.lemma,
                    token.upos,
                    token.head,
                    token.deprel,
                    if joined { "SpaceAfter=No" } else { "_" }
                ));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, form: &str, upos: &str, head: &str, deprel: &str, misc: &str) -> String {
        format!("{id}\t{form}\t{}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t{misc}", form.to_lowercase())
    }

    fn doc(body: &[String]) -> String {
        let mut s = String::from("# newdoc id = n1\n# split = train\n");
        for l in body {
            s.push_str(l);
            s.push('\n');
        }
        s.push('\n');
        s
    }

    fn no_meta() -> HashMap<String, NarrativeMetadata> {
        HashMap::new()
    }

    fn gift_block() -> Vec<String> {
        vec![
            line("1", "My", "PRON", "2", "nmod:poss", "_"),
            line("2", "brother", "NOUN", "3", "nsubj", "_"),
            line("3", "gave", "VERB", "0", "root", "_"),
            line("4", "me", "PRON", "3", "iobj", "_"),
            line("5", "a", "DET", "6", "det", "_"),
            line("6", "gift", "NOUN", "3", "obj", "_"),
        ]
    }

    #[test]
    fn minimal_block_yields_one_sentence() {
        let narratives = parse_conllu(&doc(&gift_block()), &no_meta()).unwrap();
        assert_eq!(narratives.len(), 1);
        let sentence = &narratives[0].sentences[0];
        assert_eq!(sentence.len(), 6);
        assert_eq!(sentence.root(), Some(3));
        assert_eq!(sentence.text, "My brother gave me a gift");
        assert_eq!(narratives[0].narrator_id, "n1");
    }

    #[test]
    fn range_lines_are_skipped_for_their_words() {
        let body = vec![
            line("1", "I", "PRON", "3", "nsubj", "_"),
            line("2-3", "don't", "_", "_", "_", "_"),
            line("2", "do", "AUX", "3", "aux", "_"),
            line("3", "n't", "PART", "0", "root", "_"),
        ];
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        let sentence = &narratives[0].sentences[0];
        let surfaces: Vec<_> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["I", "do", "n't"]);
        assert_eq!(sentence.text, "I don't");
    }

    #[test]
    fn range_words_exactly_cover_the_range() {
        let body = vec![
            line("1", "Bob", "PROPN", "4", "nsubj", "_"),
            line("2", "is", "AUX", "4", "cop", "_"),
            line("3-4", "won't", "_", "_", "_", "_"),
            line("3", "wo", "AUX", "4", "aux", "_"),
            line("4", "n't", "PART", "0", "root", "_"),
        ];
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        let s = &narratives[0].sentences[0];
        assert_eq!(s.len(), 4);
        assert_eq!(s.text, "Bob is won't");
    }

    #[test]
    fn empty_nodes_are_ignored() {
        let mut body = gift_block();
        body.insert(3, "3.1\tgave\tgive\tVERB\t_\t_\t_\t_\t3:conj\t_".to_string());
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        assert_eq!(narratives[0].sentences[0].len(), 6);
    }

    #[test]
    fn out_of_range_head_names_the_sentence() {
        let mut body = gift_block();
        body[5] = line("6", "gift", "NOUN", "9", "obj", "_");
        let mut text = doc(&gift_block());
        text.push_str(&body.join("\n"));
        text.push('\n');
        match parse_conllu(&text, &no_meta()) {
            Err(CorpusError::Structure { narrative_id, position, message }) => {
                assert_eq!(narrative_id, "n1");
                assert_eq!(position, 1);
                assert!(message.contains("head 9"), "{message}");
            }
            other => panic!("expected structural error, got {other:?}"),
        }
    }

    #[test]
    fn cycles_are_rejected() {
        let body = vec![
            line("1", "a", "X", "2", "dep", "_"),
            line("2", "b", "X", "1", "dep", "_"),
            line("3", "c", "VERB", "0", "root", "_"),
        ];
        let err = parse_conllu(&doc(&body), &no_meta()).unwrap_err();
        assert!(matches!(err, CorpusError::Structure { .. }), "{err}");
        assert!(err.to_string().contains("cyclic"));
    }

    #[test]
    fn two_roots_are_rejected() {
        let body = vec![line("1", "a", "X", "0", "root", "_"), line("2", "b", "X", "0", "root", "_")];
        let err = parse_conllu(&doc(&body), &no_meta()).unwrap_err();
        assert!(err.to_string().contains("exactly one root"));
    }

    #[test]
    fn malformed_columns_report_line_number() {
        let text = "# newdoc id = n1\n# split = test\n1\tMy\tmy\tPRON\n";
        match parse_conllu(text, &no_meta()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn raw_text_comment_is_used_when_it_aligns() {
        let mut body = vec!["# text = My  brother gave me a gift".to_string()];
        body.extend(gift_block());
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        let s = &narratives[0].sentences[0];
        assert_eq!(s.text, "My  brother gave me a gift");
        assert_eq!((s.tokens[1].char_start, s.tokens[1].char_end), (4, 11));
    }

    #[test]
    fn misaligned_text_comment_falls_back_to_rebuilt_text() {
        let mut body = vec!["# text = My sibling gave me a gift".to_string()];
        body.extend(gift_block());
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        assert_eq!(narratives[0].sentences[0].text, "My brother gave me a gift");
    }

    #[test]
    fn space_after_no_joins_tokens() {
        let body = vec![
            line("1", "I", "PRON", "2", "nsubj", "_"),
            line("2", "cried", "VERB", "0", "root", "SpaceAfter=No"),
            line("3", ".", "PUNCT", "2", "punct", "_"),
        ];
        let narratives = parse_conllu(&doc(&body), &no_meta()).unwrap();
        assert_eq!(narratives[0].sentences[0].text, "I cried.");
    }

    #[test]
    fn metadata_overrides_comments_and_narrator_defaults_to_id() {
        let text = format!(
            "# newdoc id = a\n# split = train\n{}\n\n# newdoc id = b\n# split = test\n# narrator_id = p7\n{}\n",
            gift_block().join("\n"),
            gift_block().join("\n")
        );
        let mut meta = HashMap::new();
        meta.insert(
            "a".to_string(),
            NarrativeMetadata { narrative_id: "a".into(), split: Some(Split::Valid), narrator_id: Some("p1".into()) },
        );
        let narratives = parse_conllu(&text, &meta).unwrap();
        assert_eq!(narratives[0].split, Split::Valid);
        assert_eq!(narratives[0].narrator_id, "p1");
        assert_eq!(narratives[1].split, Split::Test);
        assert_eq!(narratives[1].narrator_id, "p7");
    }

    #[test]
    fn missing_split_is_an_error() {
        let text = format!("# newdoc id = a\n{}\n", gift_block().join("\n"));
        assert!(matches!(parse_conllu(&text, &no_meta()), Err(CorpusError::MissingSplit(id)) if id == "a"));
    }
}
