//! Chiral verb mining, temporal antonym rewriting and subject replacement.
//!
//! Lexicon forms are token sequences with at most one `*` object slot. An
//! interior slot (`puts * down`) matches 1 to [`MAX_GAP`] tokens; a leading or
//! trailing slot (`picks up *`) only marks where an object goes on rewrite.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, CaptionCorpus, ChiralLexicon, Side, PLACEHOLDERS};
use crate::error::{Error, Result};
use crate::io;
use crate::lemma::LemmaTable;

pub const MAX_GAP: usize = 4;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "his", "her", "its", "their", "our", "my",
    "your", "some", "any", "each", "every", "all", "both", "another", "other", "one", "two",
    "three", "few", "several", "many", "much", "more", "most", "no", "not", "and", "or", "but",
    "then", "with", "without", "from", "to", "into", "onto", "on", "off", "in", "out", "of", "at",
    "by", "for", "over", "under", "up", "down", "away", "back", "again", "also", "it", "him",
    "them", "me", "us", "you", "he", "she", "they", "we", "i", "is", "are", "was", "were", "be",
    "been", "being", "there", "here", "very", "slowly", "quickly", "carefully", "together",
    "inside", "outside", "through", "across", "near", "towards", "toward", "around", "while",
    "as", "so", "just", "still",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rewriter {
    Template,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbObject {
    /// Lexicon form that matched, e.g. `"puts * down"`.
    pub verb_form: String,
    pub pair_id: i64,
    pub side: Side,
    pub object: String,
    /// Byte range from the first to the last literal token of the match.
    pub span: Range<usize>,
    /// Byte range of the tokens bound to an interior `*`.
    pub slot: Option<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedCaption {
    pub caption: Caption,
    pub vo: VerbObject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteResult {
    pub original: String,
    pub antonym: Option<String>,
    pub rewriter: Rewriter,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    start: usize,
    end: usize,
    /// Punctuation separates this token from the previous one.
    broken: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-' || c == '#'
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    let mut last_end = 0;
    spans
        .into_iter()
        .map(|(s, e)| {
            let broken = text[last_end..s].chars().any(|c| !c.is_whitespace());
            last_end = e;
            Token {
                text: &text[s..e],
                start: s,
                end: e,
                broken,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Pattern {
    form: String,
    pair_id: i64,
    side: Side,
    /// Literal segments; consecutive segments are separated by a gap.
    segments: Vec<Vec<String>>,
    literals: usize,
}

impl Pattern {
    fn compile(form: &str, pair_id: i64, side: Side) -> Pattern {
        let mut segments: Vec<Vec<String>> = vec![Vec::new()];
        for tok in form.split(' ') {
            if tok == "*" {
                segments.push(Vec::new());
            } else {
                segments.last_mut().unwrap().push(tok.to_string());
            }
        }
        segments.retain(|s| !s.is_empty());
        let literals = segments.iter().map(Vec::len).sum();
        Pattern {
            form: form.to_string(),
            pair_id,
            side,
            segments,
            literals,
        }
    }

    fn segment_at(seg: &[String], tokens: &[Token<'_>], at: usize, first: bool) -> bool {
        at + seg.len() <= tokens.len()
            && seg.iter().enumerate().all(|(k, lit)| {
                let tok = &tokens[at + k];
                (k == 0 && first || !tok.broken) && tok.text.eq_ignore_ascii_case(lit)
            })
    }

    /// Returns (end token, slot token range) for a match starting at `start`.
    fn match_at(&self, tokens: &[Token<'_>], start: usize) -> Option<(usize, Option<Range<usize>>)> {
        let first = self.segments.first()?;
        if !Self::segment_at(first, tokens, start, true) {
            return None;
        }
        let mut pos = start + first.len();
        let mut slot = None;
        for seg in &self.segments[1..] {
            let found = (1..=MAX_GAP).find(|&gap| {
                let at = pos + gap;
                tokens[pos..at.min(tokens.len())].iter().all(|t| !t.broken)
                    && Self::segment_at(seg, tokens, at, false)
            })?;
            slot = Some(pos..pos + found);
            pos += found + seg.len();
        }
        Some((pos, slot))
    }
}

/// Lexicon-driven verb/object extractor and template rewriter.
#[derive(Debug, Clone)]
pub struct Miner {
    lexicon: ChiralLexicon,
    lemmas: LemmaTable,
    patterns: Vec<Pattern>,
    by_head: HashMap<String, Vec<usize>>,
}

impl Miner {
    pub fn new(lexicon: ChiralLexicon, lemmas: LemmaTable) -> Self {
        let patterns: Vec<Pattern> = lexicon
            .forms()
            .map(|(form, pair_id, side)| Pattern::compile(form, pair_id, side))
            .filter(|p| !p.segments.is_empty())
            .collect();
        let mut by_head: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, p) in patterns.iter().enumerate() {
            by_head.entry(p.segments[0][0].clone()).or_default().push(i);
        }
        Miner {
            lexicon,
            lemmas,
            patterns,
            by_head,
        }
    }

    pub fn lexicon(&self) -> &ChiralLexicon {
        &self.lexicon
    }

    pub fn lemmas(&self) -> &LemmaTable {
        &self.lemmas
    }

    /// Longest lexicon match (most literal tokens), earliest start on ties.
    pub fn extract_verb_object(&self, text: &str) -> Option<VerbObject> {
        let tokens = tokenize(text);
        let mut best: Option<(&Pattern, usize, usize, Option<Range<usize>>)> = None;
        for start in 0..tokens.len() {
            let Some(candidates) = self.by_head.get(&tokens[start].text.to_lowercase()) else {
                continue;
            };
            for pat in candidates.iter().map(|&i| &self.patterns[i]) {
                let Some((end, slot)) = pat.match_at(&tokens, start) else {
                    continue;
                };
                let key = |p: &Pattern, s: usize, e: usize| {
                    (
                        p.literals,
                        Reverse(tokens[s].start),
                        Reverse(tokens[e - 1].end - tokens[s].start),
                        Reverse(p.form.clone()),
                    )
                };
                let better = match &best {
                    None => true,
                    Some((bp, bs, be, _)) => key(pat, start, end) > key(bp, *bs, *be),
                };
                if better {
                    best = Some((pat, start, end, slot));
                }
            }
        }
        let (pat, start, end, slot) = best?;
        let object = self.find_object(&tokens, slot.clone(), end);
        Some(VerbObject {
            verb_form: pat.form.clone(),
            pair_id: pat.pair_id,
            side: pat.side,
            object,
            span: tokens[start].start..tokens[end - 1].end,
            slot: slot.map(|r| tokens[r.start].start..tokens[r.end - 1].end),
        })
    }

    /// Head of the first noun run, looking in the slot first, then after the match.
    /// Punctuation ends the search.
    fn find_object(&self, tokens: &[Token<'_>], slot: Option<Range<usize>>, after: usize) -> String {
        let scan = |range: Range<usize>| -> Option<String> {
            let mut head: Option<&Token<'_>> = None;
            for tok in &tokens[range] {
                if tok.broken {
                    break;
                }
                if is_noun_like(tok.text) {
                    head = Some(tok);
                } else if head.is_some() {
                    break;
                }
            }
            head.map(|t| self.lemmas.noun_lemma(t.text))
        };
        slot.and_then(scan)
            .or_else(|| scan(after..tokens.len()))
            .unwrap_or_default()
    }

    pub fn mine_chiral(&self, corpus: &CaptionCorpus) -> Vec<MinedCaption> {
        corpus
            .captions()
            .par_iter()
            .filter_map(|c| {
                self.extract_verb_object(&c.text).map(|vo| MinedCaption {
                    caption: c.clone(),
                    vo,
                })
            })
            .collect()
    }

    /// Swaps the matched verb phrase for the opposite side's first-listed form.
    pub fn rewrite_antonym_template(&self, mined: &MinedCaption) -> RewriteResult {
        let original = mined.caption.text.clone();
        let absent = |why: String| RewriteResult {
            original: original.clone(),
            antonym: None,
            rewriter: Rewriter::Template,
            diagnostic: Some(why),
        };
        let vo = &mined.vo;
        let Some(pair) = self.lexicon.pair(vo.pair_id) else {
            return absent(format!("pair {} not in lexicon", vo.pair_id));
        };
        let Some(canonical) = pair.side(vo.side.opposite()).first() else {
            return absent(format!("pair {} has no opposite form", vo.pair_id));
        };
        let matched = &original[vo.span.clone()];
        let head = matched.split(|c: char| !is_word_char(c)).next().unwrap_or("");
        let Some((_, inflection)) = self.lemmas.verb(head) else {
            return absent(format!("verb {head:?} missing from lemma table"));
        };
        let mut parts: Vec<&str> = canonical.split(' ').collect();
        let canon_head = parts[0];
        let Some((canon_lemma, _)) = self.lemmas.verb(canon_head) else {
            return absent(format!("verb {canon_head:?} missing from lemma table"));
        };
        let Some(inflected) = self.lemmas.inflect(canon_lemma, inflection) else {
            return absent(format!(
                "no {inflection:?} form of {canon_lemma:?} for antonym of {head:?}"
            ));
        };
        parts[0] = inflected;

        let slot_text = vo.slot.clone().map(|r| &original[r]);
        let mut replacement: Vec<&str> = Vec::with_capacity(parts.len() + 1);
        let mut placed = false;
        for p in parts {
            if p == "*" {
                if let Some(s) = slot_text {
                    replacement.push(s);
                }
                placed = true;
            } else {
                replacement.push(p);
            }
        }
        if !placed {
            if let Some(s) = slot_text {
                replacement.push(s);
            }
        }
        let mut replacement = replacement.join(" ");
        if head.chars().next().is_some_and(char::is_uppercase) {
            replacement = capitalize(&replacement);
        }
        let antonym = format!(
            "{}{}{}",
            &original[..vo.span.start],
            replacement,
            &original[vo.span.end..]
        );
        if antonym == original {
            return absent("rewrite produced the original caption".into());
        }
        RewriteResult {
            original,
            antonym: Some(antonym),
            rewriter: Rewriter::Template,
            diagnostic: None,
        }
    }
}

fn is_noun_like(word: &str) -> bool {
    !word.starts_with('#')
        && word.chars().any(char::is_alphabetic)
        && word.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'')
        && !STOPWORDS.contains(&word.to_lowercase().as_str())
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn extract_verb_object(
    text: &str,
    lexicon: &ChiralLexicon,
    lemmas: &LemmaTable,
) -> Option<VerbObject> {
    Miner::new(lexicon.clone(), lemmas.clone()).extract_verb_object(text)
}

pub fn mine_chiral(corpus: &CaptionCorpus, lexicon: &ChiralLexicon) -> Vec<MinedCaption> {
    Miner::new(lexicon.clone(), LemmaTable::default_table()).mine_chiral(corpus)
}

/// Default pool of generic subjects used to fill anonymized placeholders.
pub fn default_subjects() -> Vec<String> {
    include_str!("../data/subjects.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

pub fn load_subjects(path: &Path) -> Result<Vec<String>> {
    let pool: Vec<String> = io::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if pool.is_empty() {
        return Err(Error::invalid(format!("{}: empty subject pool", path.display())));
    }
    Ok(pool)
}

fn substitute(text: &str, subject: &str) -> String {
    let mut out = String::with_capacity(text.len() + subject.len());
    let mut rest = text;
    let mut replaced = false;
    loop {
        let next = PLACEHOLDERS
            .iter()
            .filter_map(|p| rest.find(p).map(|i| (i, p.len())))
            .min();
        let Some((i, len)) = next else {
            out.push_str(rest);
            break;
        };
        out.push_str(&rest[..i]);
        if out.trim().is_empty() {
            out.push_str(subject);
        } else {
            out.push_str(&lowercase_first(subject));
        }
        replaced = true;
        rest = &rest[i + len..];
        // Ego4D capitalizes the verb after the placeholder ("#C C Puts ...")
        let ws = rest.len() - rest.trim_start().len();
        let word_len = rest[ws..]
            .find(|c: char| !c.is_alphabetic())
            .unwrap_or(rest.len() - ws);
        let word = &rest[ws..ws + word_len];
        let mut cs = word.chars();
        if word.len() > 1
            && cs.next().is_some_and(char::is_uppercase)
            && cs.all(char::is_lowercase)
        {
            out.push_str(&rest[..ws]);
            out.push_str(&lowercase_first(word));
            rest = &rest[ws + word_len..];
        }
    }
    if replaced {
        let lead = out.len() - out.trim_start().len();
        format!("{}{}", &out[..lead], capitalize(&out[lead..]))
    } else {
        out
    }
}

/// Fills every placeholder in the three sentences with one subject drawn uniformly from `pool`.
///
/// A subject is always drawn, so the generator advances identically whether or not
/// any placeholder is present.
pub fn replace_subjects<R: Rng + ?Sized>(
    texts: [&str; 3],
    pool: &[String],
    rng: &mut R,
) -> [String; 3] {
    assert!(!pool.is_empty(), "subject pool must be non-empty");
    let subject = &pool[rng.random_range(0..pool.len())];
    texts.map(|t| substitute(t, subject))
}

/// One row of the mined output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinedRecord {
    pub id: String,
    pub text: String,
    pub pair_id: i64,
    pub side: Side,
    pub verb_form: String,
    pub object: String,
    pub antonym: Option<String>,
    pub rewriter: Rewriter,
}

impl MinedRecord {
    pub fn new(mined: &MinedCaption, rewrite: &RewriteResult) -> Self {
        MinedRecord {
            id: mined.caption.id.clone(),
            text: mined.caption.text.clone(),
            pair_id: mined.vo.pair_id,
            side: mined.vo.side,
            verb_form: mined.vo.verb_form.clone(),
            object: mined.vo.object.clone(),
            antonym: rewrite.antonym.clone(),
            rewriter: rewrite.rewriter,
        }
    }
}

pub fn mined_to_jsonl(records: &[MinedRecord]) -> String {
    io::to_jsonl(records)
}

pub fn parse_mined(text: &str) -> Result<Vec<MinedRecord>> {
    io::records(text)
        .map(|(line, raw)| serde_json::from_str(raw).map_err(|e| Error::parse(line, e)))
        .collect()
}

pub fn write_mined(path: &Path, records: &[MinedRecord]) -> Result<()> {
    io::write_atomic(path, mined_to_jsonl(records).as_bytes())
}

pub fn read_mined(path: &Path) -> Result<Vec<MinedRecord>> {
    parse_mined(&io::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ChiralPair, Source};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn miner() -> Miner {
        Miner::new(ChiralLexicon::default_lexicon(), LemmaTable::default_table())
    }

    fn mined(m: &Miner, text: &str) -> MinedCaption {
        MinedCaption {
            caption: Caption::new("x", text, Source::Other),
            vo: m.extract_verb_object(text).expect("match"),
        }
    }

    #[test]
    fn table2_lady_closes_container() {
        let m = miner();
        let vo = m
            .extract_verb_object("The lady closes the container with its cover.")
            .unwrap();
        assert_eq!(vo.verb_form, "closes");
        assert_eq!(vo.side, Side::B);
        assert_eq!(vo.object, "container");
        let open_close = m.lexicon().lookup("opens").unwrap().0;
        assert_eq!(vo.pair_id, open_close);
        assert_eq!(vo.span, 9..15);
    }

    #[test]
    fn walking_is_not_chiral() {
        let lexicon = ChiralLexicon::new(vec![ChiralPair {
            pair_id: 1,
            side_a: vec!["opens".into()],
            side_b: vec!["closes".into()],
        }])
        .unwrap();
        let vo = extract_verb_object(
            "Someone is walking on the street",
            &lexicon,
            &LemmaTable::default_table(),
        );
        assert!(vo.is_none());
    }

    #[test]
    fn longest_match_wins() {
        let lexicon = ChiralLexicon::new(vec![
            ChiralPair {
                pair_id: 1,
                side_a: vec!["picks".into()],
                side_b: vec!["drops".into()],
            },
            ChiralPair {
                pair_id: 2,
                side_a: vec!["picks up".into()],
                side_b: vec!["puts down".into()],
            },
        ])
        .unwrap();
        let text = "picks up the bottle";
        // enumerate every match the long/short forms could produce
        let all: Vec<&str> = ["picks", "picks up"]
            .into_iter()
            .filter(|f| text.starts_with(f))
            .collect();
        let longest = all.iter().max_by_key(|f| f.split(' ').count()).unwrap();
        let vo = extract_verb_object(text, &lexicon, &LemmaTable::default_table()).unwrap();
        assert_eq!(&vo.verb_form, longest);
        assert_eq!(vo.object, "bottle");
    }

    #[test]
    fn gap_form_binds_object_in_slot() {
        let m = miner();
        let vo = m.extract_verb_object("The bartender puts the bottle down").unwrap();
        assert_eq!(vo.verb_form, "puts * down");
        assert_eq!(vo.object, "bottle");
        assert_eq!(vo.slot, Some(19..29));
        assert_eq!(&"The bartender puts the bottle down"[19..29], "the bottle");
    }

    #[test]
    fn compound_object_uses_head_noun() {
        let m = miner();
        assert_eq!(
            m.extract_verb_object("The mechanic closes the tool box").unwrap().object,
            "box"
        );
        assert_eq!(
            m.extract_verb_object("#C C opens the drawers, then waits").unwrap().object,
            "drawer"
        );
    }

    #[test]
    fn punctuation_blocks_object() {
        let m = miner();
        assert_eq!(m.extract_verb_object("She closes. The end").unwrap().object, "");
    }

    #[test]
    fn rewrite_table2_examples() {
        let m = miner();
        let r = m.rewrite_antonym_template(&mined(&m, "The lady closes the container with its cover."));
        assert_eq!(r.antonym.as_deref(), Some("The lady opens the container with its cover."));
        assert_eq!(r.rewriter, Rewriter::Template);
        let r = m.rewrite_antonym_template(&mined(&m, "The bartender puts the bottle down"));
        assert_eq!(r.antonym.as_deref(), Some("The bartender picks up the bottle"));
    }

    #[test]
    fn rewrite_keeps_inflection_and_case() {
        let m = miner();
        let r = m.rewrite_antonym_template(&mined(&m, "Closing the lid slowly."));
        assert_eq!(r.antonym.as_deref(), Some("Opening the lid slowly."));
        let r = m.rewrite_antonym_template(&mined(&m, "He picked the cup up."));
        assert_eq!(r.antonym.as_deref(), Some("He put the cup down."));
        let r = m.rewrite_antonym_template(&mined(&m, "#C C puts the food on the dish"));
        assert_eq!(r.antonym.as_deref(), Some("#C C takes the food off the dish"));
    }

    #[test]
    fn missing_inflection_makes_antonym_absent() {
        let lexicon = ChiralLexicon::new(vec![ChiralPair {
            pair_id: 7,
            side_a: vec!["seals".into(), "sealed".into()],
            side_b: vec!["unseals".into()],
        }])
        .unwrap();
        let mut lemmas = LemmaTable::default();
        lemmas.add_verb("seal", crate::lemma::Inflection::Third, "seals");
        lemmas.add_verb("seal", crate::lemma::Inflection::Past, "sealed");
        lemmas.add_verb("unseal", crate::lemma::Inflection::Third, "unseals");
        let m = Miner::new(lexicon, lemmas);
        let r = m.rewrite_antonym_template(&mined(&m, "She sealed the jar"));
        assert!(r.antonym.is_none());
        assert!(r.diagnostic.unwrap().contains("Past"));
    }

    #[test]
    fn replace_subjects_a2_example() {
        let pool = vec!["The chef".to_string()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = replace_subjects(
            [
                "#C C Puts down a serving spoon and chop sticks on a cooking pot",
                "#C C puts a spoon in a bowl.",
                "#C C Picks up a serving spoon and chop sticks from a cooking pot",
            ],
            &pool,
            &mut rng,
        );
        assert_eq!(
            out[0],
            "The chef puts down a serving spoon and chop sticks on a cooking pot"
        );
        assert_eq!(out[1], "The chef puts a spoon in a bowl.");
        assert_eq!(
            out[2],
            "The chef picks up a serving spoon and chop sticks from a cooking pot"
        );
    }

    #[test]
    fn replace_subjects_identity_and_determinism() {
        let pool = default_subjects();
        assert_eq!(pool.len(), 24);
        let texts = ["A dog runs.", "A dog is running.", "A cat sleeps."];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(replace_subjects(texts, &pool, &mut rng), texts.map(String::from));
        let placeheld = ["#C C opens a jar", "#C C opens the jar", "#C C closes a jar"];
        let a = replace_subjects(placeheld, &pool, &mut ChaCha8Rng::seed_from_u64(9));
        let b = replace_subjects(placeheld, &pool, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn placeholder_mid_sentence_is_lowercased() {
        assert_eq!(
            substitute("the cup is handed to #O by #C C", "The chef"),
            "The cup is handed to the chef by the chef"
        );
    }

    #[test]
    fn mined_record_roundtrip() {
        let m = miner();
        let mc = mined(&m, "#C C folds the cloth");
        let r = m.rewrite_antonym_template(&mc);
        let rec = MinedRecord::new(&mc, &r);
        assert_eq!(rec.antonym.as_deref(), Some("#C C unfolds the cloth"));
        let text = mined_to_jsonl(std::slice::from_ref(&rec));
        assert_eq!(parse_mined(&text).unwrap(), vec![rec]);
    }
}
