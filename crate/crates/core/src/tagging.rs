//! Deterministic part-of-speech tagger and lemmatizer.
//!
//! Tags come from a closed-class word table, an open-class lexicon seeded
//! with the movement verbs and adjectives, an irregular-verb table, and
//! suffix heuristics for everything else.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::movement::Lexicon;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Verb,
    Noun,
    Adjective,
    Adverb,
    Other,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Verb => "verb",
            Pos::Noun => "noun",
            Pos::Adjective => "adj",
            Pos::Adverb => "adv",
            Pos::Other => "other",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "verb" | "v" => Ok(Pos::Verb),
            "noun" | "n" => Ok(Pos::Noun),
            "adj" | "adjective" => Ok(Pos::Adjective),
            "adv" | "adverb" => Ok(Pos::Adverb),
            "other" => Ok(Pos::Other),
            other => Err(format!("unknown part of speech {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    /// Always lowercase.
    pub lemma: String,
    pub pos: Pos,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Inflection {
    None,
    Plural,
    Past,
    Gerund,
    Nominal,
}

#[derive(Debug, Default)]
pub struct Tagger {
    function: HashSet<String>,
    verbs: HashSet<String>,
    nouns: HashSet<String>,
    adjectives: HashSet<String>,
    adverbs: HashSet<String>,
    irregular: HashMap<String, String>,
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "my", "our", "your", "his", "her", "its", "their", "this", "that",
    "these", "those", "'s", "no", "every", "each", "some", "any",
];

const AUXILIARIES: &[&str] = &["will", "would", "can", "could", "should", "shall", "may", "might", "must", "to", "n't", "not"];

fn undouble(stem: &str) -> Option<String> {
    let b = stem.as_bytes();
    let n = b.len();
    (n >= 3 && b[n - 1] == b[n - 2] && !b"aeiou".contains(&b[n - 1])).then(|| stem[..n - 1].to_string())
}

impl Tagger {
    /// The tagger built from the bundled lexicons.
    pub fn shared() -> &'static Tagger {
        static TAGGER: OnceLock<Tagger> = OnceLock::new();
        TAGGER.get_or_init(|| {
            let mut t = Tagger::from_lexicon_text(include_str!("../data/tagger_lexicon.txt"));
            t.add_movement_lexicon(Lexicon::bundled());
            t
        })
    }

    pub fn from_lexicon_text(src: &str) -> Tagger {
        let mut t = Tagger::default();
        let mut section = "";
        for line in src.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name {
                    "function" => "function",
                    "verbs" => "verbs",
                    "nouns" => "nouns",
                    "adjectives" => "adjectives",
                    "adverbs" => "adverbs",
                    "irregular" => "irregular",
                    _ => "",
                };
                continue;
            }
            if section == "irregular" {
                if let Some((form, lemma)) = line.split_once(char::is_whitespace) {
                    t.irregular.insert(form.to_lowercase(), lemma.trim().to_lowercase());
                }
                continue;
            }
            let set = match section {
                "function" => &mut t.function,
                "verbs" => &mut t.verbs,
                "nouns" => &mut t.nouns,
                "adjectives" => &mut t.adjectives,
                "adverbs" => &mut t.adverbs,
                _ => continue,
            };
            set.extend(line.split_whitespace().map(str::to_lowercase));
        }
        t
    }

    pub fn add_movement_lexicon(&mut self, lex: &Lexicon) {
        self.verbs.extend(lex.verbs.iter().cloned());
        self.adjectives.extend(lex.adjectives.iter().cloned());
        self.adverbs.extend(lex.adverbs.iter().cloned());
    }

    fn known(&self, w: &str) -> bool {
        self.verbs.contains(w) || self.nouns.contains(w) || self.adjectives.contains(w)
    }

    fn pick(&self, candidates: &[String]) -> Option<String> {
        candidates.iter().find(|c| self.known(c)).cloned()
    }

    /// Lemma of a lowercased word, plus the inflection that was removed.
    fn analyze(&self, w: &str) -> (String, Inflection) {
        if let Some(lemma) = self.irregular.get(w) {
            let infl = if w.ends_with("ing") { Inflection::Gerund } else { Inflection::Past };
            return (lemma.clone(), infl);
        }
        if self.function.contains(w) || self.known(w) || self.adverbs.contains(w) {
            return (w.to_string(), Inflection::None);
        }
        let len = w.chars().count();
        if len > 6 {
            for suffix in ["ations", "ation"] {
                if let Some(stem) = w.strip_suffix(suffix) {
                    let mut c = vec![stem.to_string(), format!("{stem}e"), format!("{stem}ate")];
                    c.extend(undouble(stem));
                    if let Some(l) = self.pick(&c).filter(|l| self.verbs.contains(l)) {
                        return (l, Inflection::Nominal);
                    }
                }
            }
        }
        if len > 4 {
            if let Some(stem) = w.strip_suffix("ied") {
                return (format!("{stem}y"), Inflection::Past);
            }
            if let Some(stem) = w.strip_suffix("ed") {
                return (self.verb_stem(stem), Inflection::Past);
            }
        }
        if len > 4 {
            if let Some(stem) = w.strip_suffix("ing") {
                return (self.verb_stem(stem), Inflection::Gerund);
            }
        }
        if len > 3 {
            if let Some(stem) = w.strip_suffix("ies") {
                return (format!("{stem}y"), Inflection::Plural);
            }
            if let Some(stem) = w.strip_suffix("es") {
                if stem.ends_with(['s', 'x', 'z', 'o']) || stem.ends_with("ch") || stem.ends_with("sh") {
                    let c = [stem.to_string(), format!("{stem}e")];
                    return (self.pick(&c).unwrap_or_else(|| stem.to_string()), Inflection::Plural);
                }
            }
            if let Some(stem) = w.strip_suffix('s') {
                if !(stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i')) {
                    return (stem.to_string(), Inflection::Plural);
                }
            }
        }
        (w.to_string(), Inflection::None)
    }

    fn verb_stem(&self, stem: &str) -> String {
        let mut c = vec![stem.to_string(), format!("{stem}e")];
        let undoubled = undouble(stem);
        c.extend(undoubled.clone());
        if let Some(l) = self.pick(&c) {
            return l;
        }
        match undoubled {
            Some(u) if !stem.ends_with("ll") && !stem.ends_with("ss") && !stem.ends_with("ff") && !stem.ends_with("zz") => u,
            _ => stem.to_string(),
        }
    }

    /// Lowercased lemma of a single word.
    pub fn lemma(&self, word: &str) -> String {
        self.analyze(&word.to_lowercase()).0
    }

    fn pos_for(&self, lower: &str, lemma: &str, infl: Inflection, prev: Option<&str>, capitalized_inner: bool) -> Pos {
        if self.irregular.contains_key(lower) {
            return Pos::Verb;
        }
        if self.function.contains(lower) {
            return Pos::Other;
        }
        let after_det = prev.is_some_and(|p| DETERMINERS.contains(&p) || self.adjectives.contains(p));
        let after_aux = prev.is_some_and(|p| AUXILIARIES.contains(&p));
        if self.adverbs.contains(lower) {
            return Pos::Adverb;
        }
        match infl {
            Inflection::Past => return Pos::Verb,
            Inflection::Gerund => {
                return if self.nouns.contains(lower) || (after_det && !self.verbs.contains(lemma)) {
                    Pos::Noun
                } else {
                    Pos::Verb
                };
            }
            Inflection::Nominal => return Pos::Noun,
            Inflection::Plural => {
                let noun = self.nouns.contains(lemma);
                let verb = self.verbs.contains(lemma);
                return if verb && (!noun || !after_det) && !capitalized_inner { Pos::Verb } else { Pos::Noun };
            }
            Inflection::None => {}
        }
        let noun = self.nouns.contains(lemma);
        let verb = self.verbs.contains(lemma);
        let adj = self.adjectives.contains(lemma);
        if capitalized_inner && !verb && !adj {
            return Pos::Noun;
        }
        match (verb, noun, adj) {
            (true, true, _) => return if after_det { Pos::Noun } else { Pos::Verb },
            (true, false, true) => return if after_aux { Pos::Verb } else { Pos::Adjective },
            (true, false, false) => return Pos::Verb,
            (false, true, _) => return Pos::Noun,
            (false, false, true) => return Pos::Adjective,
            _ => {}
        }
        if lower.chars().count() > 4 && lower.ends_with("ly") {
            return Pos::Adverb;
        }
        const ADJ_SUFFIXES: &[&str] = &["less", "ful", "ous", "ive", "able", "ible", "ical", "ic", "al"];
        if ADJ_SUFFIXES.iter().any(|s| lower.len() > s.len() + 2 && lower.ends_with(s)) {
            return Pos::Adjective;
        }
        if lower.chars().all(|c| c.is_ascii_digit()) {
            return Pos::Other;
        }
        Pos::Noun
    }

    /// Tag every word token of `text`.
    pub fn tag(&self, text: &str) -> Vec<TaggedToken> {
        let tokens = text::tokenize(text);
        let mut out: Vec<TaggedToken> = Vec::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            let lower = tok.text.to_lowercase();
            let (lemma, infl) = self.analyze(&lower);
            let prev = out.last().map(|t| t.lemma.as_str());
            let capitalized_inner = i > 0 && tok.text.chars().next().is_some_and(char::is_uppercase);
            let pos = self.pos_for(&lower, &lemma, infl, prev, capitalized_inner);
            out.push(TaggedToken {
                surface: tok.text.to_string(),
                lemma,
                pos,
                start: tok.start,
                end: tok.end,
            });
        }
        out
    }
}

/// Tag with the bundled tagger.
pub fn pos_tag(text: &str) -> Vec<TaggedToken> {
    Tagger::shared().tag(text)
}
