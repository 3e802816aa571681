//! Caption corpora and chiral verb lexicons.
//!
//! Both are stored as one JSON object per line. Loaded values are immutable;
//! every invariant is checked at load time so downstream code can rely on it.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// Anonymized-subject tokens used by Ego4D narrations.
pub const PLACEHOLDERS: [&str; 2] = ["#C C", "#O"];

pub fn has_placeholder(text: &str) -> bool {
    PLACEHOLDERS.iter().any(|p| text.contains(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Nli,
    Ego4d,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caption {
    pub id: String,
    pub text: String,
    pub source: Source,
    pub has_placeholder: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionRecord {
    id: String,
    text: String,
    source: Source,
}

impl Caption {
    pub fn new(id: impl Into<String>, text: impl Into<String>, source: Source) -> Self {
        let text = text.into();
        Caption {
            id: id.into(),
            has_placeholder: has_placeholder(&text),
            text,
            source,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CaptionCorpus {
    captions: Vec<Caption>,
    by_id: HashMap<String, usize>,
}

impl CaptionCorpus {
    pub fn from_captions(captions: Vec<Caption>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(captions.len());
        for (i, c) in captions.iter().enumerate() {
            if c.text.trim().is_empty() {
                return Err(Error::EmptyText(c.id.clone()));
            }
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(c.id.clone()));
            }
        }
        Ok(CaptionCorpus { captions, by_id })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut captions = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (line, raw) in io::records(text) {
            let rec: CaptionRecord =
                serde_json::from_str(raw).map_err(|e| Error::parse(line, e))?;
            if rec.text.trim().is_empty() {
                return Err(Error::parse(line, Error::EmptyText(rec.id)));
            }
            if let Some(first) = seen.insert(rec.id.clone(), line) {
                return Err(Error::parse(
                    line,
                    format!("{} (first seen on line {first})", Error::DuplicateId(rec.id)),
                ));
            }
            captions.push(Caption::new(rec.id, rec.text, rec.source));
        }
        Self::from_captions(captions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn to_jsonl(&self) -> String {
        io::to_jsonl(self.captions.iter().map(|c| CaptionRecord {
            id: c.id.clone(),
            text: c.text.clone(),
            source: c.source,
        }))
    }

    pub fn get(&self, id: &str) -> Option<&Caption> {
        self.by_id.get(id).map(|&i| &self.captions[i])
    }

    pub fn captions(&self) -> &[Caption] {
        &self.captions
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

pub fn load_corpus(path: &Path) -> Result<CaptionCorpus> {
    CaptionCorpus::load(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::A => "a",
            Side::B => "b",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiralPair {
    pub pair_id: i64,
    pub side_a: Vec<String>,
    pub side_b: Vec<String>,
}

impl ChiralPair {
    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::A => &self.side_a,
            Side::B => &self.side_b,
        }
    }
}

/// Lowercases and collapses runs of whitespace to a single space.
pub fn normalize_form(form: &str) -> String {
    form.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct ChiralLexicon {
    pairs: Vec<ChiralPair>,
    by_form: HashMap<String, (i64, Side)>,
    by_pair: HashMap<i64, usize>,
}

impl ChiralLexicon {
    pub fn new(pairs: Vec<ChiralPair>) -> Result<Self> {
        let mut lexicon = ChiralLexicon::default();
        for mut pair in pairs {
            pair.side_a = pair.side_a.iter().map(|f| normalize_form(f)).collect();
            pair.side_b = pair.side_b.iter().map(|f| normalize_form(f)).collect();
            for (side, forms) in [(Side::A, &pair.side_a), (Side::B, &pair.side_b)] {
                if forms.is_empty() {
                    return Err(Error::EmptySide {
                        pair_id: pair.pair_id,
                        side: if side == Side::A { "side_a" } else { "side_b" },
                    });
                }
                for form in forms {
                    if form.is_empty() {
                        return Err(Error::invalid(format!(
                            "pair {} has a blank form",
                            pair.pair_id
                        )));
                    }
                    if let Some(&(first, _)) = lexicon.by_form.get(form) {
                        return Err(Error::DuplicateForm {
                            form: form.clone(),
                            first,
                            second: pair.pair_id,
                        });
                    }
                    lexicon.by_form.insert(form.clone(), (pair.pair_id, side));
                }
            }
            if lexicon.by_pair.insert(pair.pair_id, lexicon.pairs.len()).is_some() {
                return Err(Error::invalid(format!("duplicate pair_id {}", pair.pair_id)));
            }
            lexicon.pairs.push(pair);
        }
        Ok(lexicon)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (line, raw) in io::records(text) {
            let pair: ChiralPair = serde_json::from_str(raw).map_err(|e| Error::parse(line, e))?;
            pairs.push(pair);
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    /// The curated lexicon shipped with the crate.
    pub fn default_lexicon() -> Self {
        Self::parse(include_str!("../data/lexicon.jsonl")).expect("shipped lexicon is valid")
    }

    pub fn lookup(&self, form: &str) -> Option<(i64, Side)> {
        self.by_form.get(form).copied()
    }

    pub fn pair(&self, pair_id: i64) -> Option<&ChiralPair> {
        self.by_pair.get(&pair_id).map(|&i| &self.pairs[i])
    }

    pub fn pairs(&self) -> &[ChiralPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = (&str, i64, Side)> {
        self.by_form.iter().map(|(f, &(p, s))| (f.as_str(), p, s))
    }
}

pub fn load_lexicon(path: &Path) -> Result<ChiralLexicon> {
    ChiralLexicon::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_three_lines() {
        let text = r##"{"id":"a","text":"#C C opens the door","source":"ego4d"}
{"id":"b","text":"A dog is swimming.","source":"nli"}
{"id":"c","text":"someone waves","source":"other"}
"##;
        let corpus = CaptionCorpus::parse(text).unwrap();
        assert_eq!(corpus.len(), 3);
        assert!(corpus.get("a").unwrap().has_placeholder);
        assert!(!corpus.get("b").unwrap().has_placeholder);
        assert_eq!(corpus.captions()[2].id, "c");
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let text = "{\"id\":\"a\",\"text\":\"x\",\"source\":\"nli\"}\n{\"id\":\"a\",\"text\":\"y\",\"source\":\"nli\"}\n";
        let err = CaptionCorpus::parse(text).unwrap_err().to_string();
        assert!(err.contains("\"a\""), "{err}");
        assert!(err.starts_with("line 2"), "{err}");
    }

    #[test]
    fn empty_text_is_rejected() {
        let err = CaptionCorpus::parse("{\"id\":\"a\",\"text\":\"   \",\"source\":\"nli\"}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("empty text"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":\"a\",\"text\":\"x\",\"source\":\"nli\"}\n\n{\"id\":\"b\",\"text\":\n";
        match CaptionCorpus::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn placeholder_o_detected() {
        assert!(has_placeholder("#O man X picks a cup"));
        assert!(!has_placeholder("#C picks a cup"));
    }

    #[test]
    fn lexicon_accepts_open_close() {
        let lex = ChiralLexicon::parse(
            r#"{"pair_id":1,"side_a":["opens","open"],"side_b":["closes","Close"]}"#,
        )
        .unwrap();
        assert_eq!(lex.lookup("close"), Some((1, Side::B)));
        assert_eq!(lex.lookup("opens"), Some((1, Side::A)));
    }

    #[test]
    fn lexicon_rejects_empty_side() {
        let err = ChiralLexicon::parse(r#"{"pair_id":1,"side_a":["opens"],"side_b":[]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::EmptySide { pair_id: 1, .. }));
    }

    #[test]
    fn lexicon_rejects_form_in_two_pairs() {
        let text = "{\"pair_id\":1,\"side_a\":[\"opens\"],\"side_b\":[\"closes\"]}\n{\"pair_id\":2,\"side_a\":[\"opens\"],\"side_b\":[\"shuts\"]}";
        let err = ChiralLexicon::parse(text).unwrap_err().to_string();
        assert!(err.contains("\"opens\""), "{err}");
    }

    #[test]
    fn lexicon_rejects_form_on_both_sides() {
        let err =
            ChiralLexicon::parse(r#"{"pair_id":1,"side_a":["turns"],"side_b":["Turns  "]}"#)
                .unwrap_err();
        assert!(matches!(err, Error::DuplicateForm { .. }));
    }

    #[test]
    fn forms_are_normalized() {
        assert_eq!(normalize_form("  Picks   UP "), "picks up");
    }

    #[test]
    fn default_lexicon_has_working_set() {
        let lex = ChiralLexicon::default_lexicon();
        assert!(lex.len() >= 35);
    }
}
