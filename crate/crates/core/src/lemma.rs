//! Inflection table for verbs and nouns.
//!
//! Text format, tab separated, `#` comments:
//!
//! ```text
//! v   base    3sg     gerund  past
//! n   singular plural
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inflection {
    Base,
    Third,
    Gerund,
    Past,
}

impl Inflection {
    const ORDER: [Inflection; 4] = [
        Inflection::Base,
        Inflection::Third,
        Inflection::Gerund,
        Inflection::Past,
    ];
}

#[derive(Debug, Clone, Default)]
pub struct LemmaTable {
    verbs: HashMap<String, (String, Inflection)>,
    forms: HashMap<(String, Inflection), String>,
    nouns: HashMap<String, String>,
}

impl LemmaTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = LemmaTable::default();
        for (line, raw) in io::records(text) {
            let raw = raw.trim();
            if raw.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            match cols.as_slice() {
                ["v", base, third, gerund, past] => {
                    let lemma = base.to_lowercase();
                    for (infl, surface) in Inflection::ORDER.iter().zip([base, third, gerund, past])
                    {
                        table.add_verb(&lemma, *infl, &surface.to_lowercase());
                    }
                }
                ["n", singular, plural] => {
                    let singular = singular.to_lowercase();
                    table.nouns.insert(plural.to_lowercase(), singular.clone());
                    table.nouns.entry(singular.clone()).or_insert(singular);
                }
                _ => return Err(Error::parse(line, format!("bad lemma row {raw:?}"))),
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    /// The table shipped with the crate.
    pub fn default_table() -> Self {
        Self::parse(include_str!("../data/lemmas.tsv")).expect("shipped lemma table is valid")
    }

    pub fn add_verb(&mut self, lemma: &str, inflection: Inflection, surface: &str) {
        // first registration wins, so "put" stays Base rather than Past
        self.verbs
            .entry(surface.to_string())
            .or_insert_with(|| (lemma.to_string(), inflection));
        self.forms
            .insert((lemma.to_string(), inflection), surface.to_string());
    }

    pub fn verb(&self, surface: &str) -> Option<(&str, Inflection)> {
        self.verbs
            .get(&surface.to_lowercase())
            .map(|(l, i)| (l.as_str(), *i))
    }

    pub fn inflect(&self, lemma: &str, inflection: Inflection) -> Option<&str> {
        self.forms
            .get(&(lemma.to_string(), inflection))
            .map(String::as_str)
    }

    /// Noun lemma, falling back to the lowercased surface.
    pub fn noun_lemma(&self, surface: &str) -> String {
        let lower = surface.to_lowercase();
        self.nouns.get(&lower).cloned().unwrap_or(lower)
    }
}
