//! Declarative negation rules that label movement statements as normal or
//! impaired, and the evaluation harness around them.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MovementClass;
pub use crate::metrics::{ConfusionMatrix, Metrics, MetricsError};
use crate::tagging::{Pos, Tagger, TaggedToken};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rules line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate rule id {0:?}")]
    DuplicateId(String),
    #[error("rule {0:?} has an empty pattern")]
    EmptyPattern(String),
    #[error("rule {0:?}: exact and lemma patterns must be lowercase")]
    NotLowercase(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("labeled record {record}: {reason}")]
    BadLabeled { record: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    ExactWord,
    Prefix,
    Suffix,
    Lemma,
}

impl MatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchKind::ExactWord => "exact",
            MatchKind::Prefix => "prefix",
            MatchKind::Suffix => "suffix",
            MatchKind::Lemma => "lemma",
        }
    }
}

impl fmt::Display for MatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchKind::ExactWord),
            "prefix" => Ok(MatchKind::Prefix),
            "suffix" => Ok(MatchKind::Suffix),
            "lemma" => Ok(MatchKind::Lemma),
            other => Err(format!("unknown match kind {other:?}")),
        }
    }
}

/// A single impaired-movement trigger.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImpairmentRule {
    pub rule_id: String,
    /// `None` matches any part of speech.
    pub target_pos: Option<Pos>,
    pub kind: MatchKind,
    pub pattern: String,
}

/// What a rule matches, ignoring its id.
pub type RuleSignature = (Option<Pos>, MatchKind, String);

impl ImpairmentRule {
    pub fn new(rule_id: &str, target_pos: Option<Pos>, kind: MatchKind, pattern: &str) -> Self {
        ImpairmentRule { rule_id: rule_id.into(), target_pos, kind, pattern: pattern.into() }
    }

    pub fn signature(&self) -> RuleSignature {
        (self.target_pos, self.kind, self.pattern.clone())
    }

    pub fn matches(&self, tok: &TaggedToken) -> bool {
        if self.target_pos.is_some_and(|p| p != tok.pos) {
            return false;
        }
        let p = self.pattern.as_str();
        match self.kind {
            MatchKind::ExactWord => tok.surface.to_lowercase().replace('\u{2019}', "'") == p,
            MatchKind::Lemma => tok.lemma == p,
            MatchKind::Prefix => tok.lemma.len() > p.len() && tok.lemma.starts_with(p),
            MatchKind::Suffix => tok.lemma.len() > p.len() && tok.lemma.ends_with(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub name: String,
    pub rules: Vec<ImpairmentRule>,
}

fn pos_field(s: &str) -> Result<Option<Pos>, String> {
    match s {
        "any" => Ok(None),
        "verb" | "noun" | "adj" | "adv" => s.parse().map(Some),
        other => Err(format!("unknown pos {other:?}")),
    }
}

impl RuleSet {
    pub fn new(name: impl Into<String>, rules: Vec<ImpairmentRule>) -> Result<RuleSet, RuleError> {
        let rs = RuleSet { name: name.into(), rules };
        rs.validate()?;
        Ok(rs)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let mut ids = HashSet::new();
        for r in &self.rules {
            if !ids.insert(r.rule_id.as_str()) {
                return Err(RuleError::DuplicateId(r.rule_id.clone()));
            }
            if r.pattern.is_empty() {
                return Err(RuleError::EmptyPattern(r.rule_id.clone()));
            }
            if matches!(r.kind, MatchKind::ExactWord | MatchKind::Lemma) && r.pattern != r.pattern.to_lowercase() {
                return Err(RuleError::NotLowercase(r.rule_id.clone()));
            }
        }
        Ok(())
    }

    /// Parse the tab-separated rules format
    /// (`rule_id`, `pos`, `match_kind`, `pattern`).
    pub fn parse(name: impl Into<String>, src: &str) -> Result<RuleSet, RuleError> {
        let mut rules = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |reason: String| RuleError::Parse { line: line_no, reason };
            let cols: Vec<&str> = trimmed.split('\t').collect();
            let [id, pos, kind, pattern] = cols.as_slice() else {
                return Err(err(format!("expected 4 tab-separated fields, found {}", cols.len())));
            };
            rules.push(ImpairmentRule {
                rule_id: id.trim().to_string(),
                target_pos: pos_field(pos.trim()).map_err(err)?,
                kind: kind.trim().parse().map_err(err)?,
                pattern: pattern.trim().to_string(),
            });
        }
        RuleSet::new(name, rules)
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom").to_string();
        RuleSet::parse(name, &std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let pos = r.target_pos.map_or("any", Pos::as_str);
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.rule_id, pos, r.kind, r.pattern));
        }
        out
    }

    pub fn signatures(&self) -> BTreeSet<RuleSignature> {
        self.rules.iter().map(ImpairmentRule::signature).collect()
    }

    /// Label tagged tokens. Any firing rule makes the statement impaired.
    pub fn apply(&self, tokens: &[TaggedToken]) -> Classification {
        let fired: Vec<String> = self
            .rules
            .iter()
            .filter(|r| tokens.iter().any(|t| r.matches(t)))
            .map(|r| r.rule_id.clone())
            .collect();
        let label = if fired.is_empty() { MovementClass::Normal } else { MovementClass::Impaired };
        Classification { label, fired }
    }

    /// Tag `text` with the bundled tagger and label it.
    pub fn classify_text(&self, text: &str) -> Classification {
        self.apply(&Tagger::shared().tag(text))
    }
}

/// The general-purpose negation rules: negation cue words, verbs prefixed
/// with de-/mis-/dis-, adjectives prefixed with a-/dis- or suffixed -less.
pub fn baseline_ruleset() -> RuleSet {
    RuleSet::parse("baseline", include_str!("../data/rules/baseline.tsv")).expect("bundled baseline rules")
}

/// The baseline adapted to movement: prefix rules dropped, lemma rules for
/// cancel/postpone/prevent/avoid added.
pub fn modified_ruleset() -> RuleSet {
    RuleSet::parse("modified", include_str!("../data/rules/modified.tsv")).expect("bundled modified rules")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: MovementClass,
    pub fired: Vec<String>,
}

pub fn apply_ruleset(tokens: &[TaggedToken], rs: &RuleSet) -> Classification {
    rs.apply(tokens)
}

/// Confusion counts with `Impaired` as the positive class.
pub fn evaluate(pred: &[MovementClass], gold: &[MovementClass]) -> Result<ConfusionMatrix, MetricsError> {
    ConfusionMatrix::from_labels(pred, gold, &MovementClass::Impaired)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStatement {
    pub text: String,
    pub label: MovementClass,
}

/// Parse `{"text": ..., "label": "impaired" | "normal"}` lines.
pub fn parse_labeled(src: &str) -> Result<Vec<LabeledStatement>, RuleError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RuleError::BadLabeled { record: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Label every statement with `rs` and compare with the gold labels.
pub fn evaluate_ruleset(rs: &RuleSet, data: &[LabeledStatement]) -> ConfusionMatrix {
    let pred: Vec<MovementClass> = data.iter().map(|d| rs.classify_text(&d.text).label).collect();
    let gold: Vec<MovementClass> = data.iter().map(|d| d.label).collect();
    evaluate(&pred, &gold).expect("equal lengths")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagging::pos_tag;
    use MovementClass::{Impaired, Normal};

    fn sig(pos: Option<Pos>, kind: MatchKind, p: &str) -> RuleSignature {
        (pos, kind, p.to_string())
    }

    #[test]
    fn baseline_contents() {
        let b = baseline_ruleset();
        assert_eq!(b.rules.len(), 16);
        let s = b.signatures();
        for w in ["no", "not", "never", "none", "nobody", "nothing", "nowhere", "n't", "without", "cannot"] {
            assert!(s.contains(&sig(None, MatchKind::ExactWord, w)), "{w}");
        }
        assert!(s.contains(&sig(Some(Pos::Verb), MatchKind::Prefix, "mis")));
        assert!(s.contains(&sig(Some(Pos::Adjective), MatchKind::Prefix, "a")));
        assert!(s.contains(&sig(Some(Pos::Adjective), MatchKind::Suffix, "less")));
    }

    #[test]
    fn modified_is_baseline_minus_prefixes_plus_lemmas() {
        let base = baseline_ruleset().signatures();
        let modi = modified_ruleset().signatures();
        let removed: BTreeSet<_> = base.difference(&modi).cloned().collect();
        let added: BTreeSet<_> = modi.difference(&base).cloned().collect();
        let want_removed: BTreeSet<_> = [
            sig(Some(Pos::Verb), MatchKind::Prefix, "de"),
            sig(Some(Pos::Verb), MatchKind::Prefix, "mis"),
            sig(Some(Pos::Verb), MatchKind::Prefix, "dis"),
            sig(Some(Pos::Adjective), MatchKind::Prefix, "a"),
            sig(Some(Pos::Adjective), MatchKind::Prefix, "dis"),
        ]
        .into();
        let want_added: BTreeSet<_> = ["cancel", "postpone", "prevent", "avoid"]
            .iter()
            .map(|l| sig(None, MatchKind::Lemma, l))
            .collect();
        assert_eq!(removed, want_removed);
        assert_eq!(added, want_added);
    }

    #[test]
    fn baseline_examples() {
        let b = baseline_ruleset();
        let c = b.classify_text("She does not have cancer.");
        assert_eq!(c, Classification { label: Impaired, fired: vec!["exact:not".into()] });
        let c = b.classify_text("He dismissed the idea.");
        assert_eq!(c.fired, ["verb-prefix:dis"]);
        assert_eq!(b.classify_text("The train arrived.").label, Normal);
        assert_eq!(b.classify_text("no flights").fired, ["exact:no"]);
    }

    #[test]
    fn modified_examples() {
        let m = modified_ruleset();
        let c = m.classify_text("Our flight to England was canceled.");
        assert_eq!(c, Classification { label: Impaired, fired: vec!["lemma:cancel".into()] });
        assert_eq!(m.classify_text("He dismissed the idea.").label, Normal);
        assert_eq!(m.classify_text("The match was postponed.").fired, ["lemma:postpone"]);
        let c = m.classify_text("Flights were not running because the route was canceled.");
        assert_eq!(c.fired.len(), 2);
    }

    #[test]
    fn contraction_and_suffix() {
        let b = baseline_ruleset();
        assert_eq!(b.classify_text("We didn't travel to Rome.").fired, ["exact:n't"]);
        assert_eq!(b.classify_text("We didn\u{2019}t travel to Rome.").fired, ["exact:n't"]);
        assert_eq!(b.classify_text("Passengers were left helpless at the port.").fired, ["adj-suffix:less"]);
    }

    #[test]
    fn prefix_requires_pos() {
        let b = baseline_ruleset();
        // "destination" is a noun, so the verb prefix rule stays quiet
        assert_eq!(b.classify_text("The destination was Rome.").label, Normal);
    }

    #[test]
    fn empty_trigger_intersection() {
        let toks = pos_tag("The ship sailed to Boston.");
        assert_eq!(apply_ruleset(&toks, &modified_ruleset()), Classification { label: Normal, fired: vec![] });
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let b = baseline_ruleset();
        assert_eq!(RuleSet::parse("baseline", &b.to_tsv()).unwrap(), b);
        assert!(matches!(RuleSet::parse("x", "a\tany\texact\n"), Err(RuleError::Parse { line: 1, .. })));
        assert!(matches!(RuleSet::parse("x", "a\tpronoun\texact\tno\n"), Err(RuleError::Parse { .. })));
        assert!(matches!(RuleSet::parse("x", "a\tany\tregex\tno\n"), Err(RuleError::Parse { .. })));
        assert!(matches!(
            RuleSet::parse("x", "a\tany\texact\tno\na\tany\texact\tnot\n"),
            Err(RuleError::DuplicateId(_))
        ));
        assert!(matches!(RuleSet::parse("x", "a\tany\tlemma\tCancel\n"), Err(RuleError::NotLowercase(_))));
        assert!(matches!(RuleSet::parse("x", "a\tany\tlemma\t\n"), Err(RuleError::EmptyPattern(_))));
    }

    #[test]
    fn evaluate_counts() {
        let mut pred = vec![Impaired; 10];
        pred.extend(vec![Normal; 10]);
        let cm = evaluate(&pred, &pred).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(10, 0, 0, 10));
        let gold = [Impaired, Impaired, Impaired, Impaired, Impaired, Normal];
        let cm = evaluate(&[Normal; 6], &gold).unwrap();
        assert_eq!(cm.fn_, 5);
        assert!(evaluate(&[Normal], &[]).is_err());
    }

    #[test]
    fn labeled_parsing() {
        let d = parse_labeled("{\"text\":\"a b c\",\"label\":\"impaired\"}\n\n{\"text\":\"x\",\"label\":\"normal\"}\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].label, Impaired);
        assert!(parse_labeled("{\"text\":\"x\",\"label\":\"maybe\"}").is_err());
    }
}
