//! Movement-likelihood scoring and threshold filtering.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Statement;
use crate::tagging::Tagger;
use crate::text;

/// Default movement cut-off; a statement must score strictly above it.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Error)]
pub enum MovementError {
    #[error("cannot score empty text")]
    EmptyText,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("lexicon {path}: {source}")]
    Lexicon {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: entry outside of a [verbs]/[adjectives]/[adverbs] section")]
    LexiconSection { line: usize },
}

/// Movement verbs, adjectives and adverbs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub verbs: HashSet<String>,
    pub adjectives: HashSet<String>,
    pub adverbs: HashSet<String>,
}

impl Lexicon {
    /// Parse the sectioned lexicon format: `[verbs]`, `[adjectives]` and
    /// `[adverbs]` headers, one lemma per line, `#` comments.
    pub fn parse(src: &str) -> Result<Lexicon, MovementError> {
        let mut lex = Lexicon::default();
        let mut section: Option<&mut HashSet<String>> = None;
        for (i, line) in src.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[verbs]" => section = Some(&mut lex.verbs),
                "[adjectives]" => section = Some(&mut lex.adjectives),
                "[adverbs]" => section = Some(&mut lex.adverbs),
                _ => match section.as_deref_mut() {
                    Some(set) => {
                        set.insert(line.to_lowercase());
                    }
                    None => return Err(MovementError::LexiconSection { line: i + 1 }),
                },
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Lexicon, MovementError> {
        let src = std::fs::read_to_string(path)
            .map_err(|source| MovementError::Lexicon { path: path.to_path_buf(), source })?;
        Lexicon::parse(&src)
    }

    /// The lexicon shipped with the crate.
    pub fn bundled() -> &'static Lexicon {
        static LEX: OnceLock<Lexicon> = OnceLock::new();
        LEX.get_or_init(|| {
            Lexicon::parse(include_str!("../data/movement_lexicon.txt")).expect("bundled lexicon")
        })
    }

    pub fn len(&self) -> usize {
        self.verbs.len() + self.adjectives.len() + self.adverbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MovementScorerConfig {
    pub threshold: f64,
    /// Lexicon file; the bundled lexicon is used when unset.
    pub lexicon_path: Option<PathBuf>,
}

impl Default for MovementScorerConfig {
    fn default() -> Self {
        MovementScorerConfig { threshold: DEFAULT_THRESHOLD, lexicon_path: None }
    }
}

impl MovementScorerConfig {
    pub fn with_threshold(threshold: f64) -> Result<Self, MovementError> {
        let cfg = MovementScorerConfig { threshold, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MovementError> {
        if (0.0..=1.0).contains(&self.threshold) {
            Ok(())
        } else {
            Err(MovementError::BadThreshold(self.threshold))
        }
    }
}

/// Anything that maps a statement to a movement likelihood in `[0, 1]`.
pub trait MovementScorer: Send + Sync {
    fn score(&self, text: &str) -> Result<f64, MovementError>;
}

/// Hit weights of the lexicon scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexiconWeights {
    pub verb: f64,
    pub modifier: f64,
    pub preposition: f64,
    /// Half-saturation constant `c` of `h / (h + c)`.
    pub saturation: f64,
}

impl Default for LexiconWeights {
    fn default() -> Self {
        LexiconWeights { verb: 1.0, modifier: 0.5, preposition: 0.25, saturation: 0.5 }
    }
}

const DIRECTIONAL: &[&str] = &["to", "from", "into", "through", "toward", "towards"];

/// Weighted lexicon hits squashed by `h / (h + c)`.
///
/// Verbs are matched on their lemma, adjectives and adverbs on the surface
/// form, directional prepositions literally; all case-insensitively.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: Lexicon,
    weights: LexiconWeights,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon) -> Self {
        LexiconScorer { lexicon, weights: LexiconWeights::default() }
    }

    pub fn with_weights(mut self, weights: LexiconWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn bundled() -> Self {
        LexiconScorer::new(Lexicon::bundled().clone())
    }

    pub fn from_config(cfg: &MovementScorerConfig) -> Result<Self, MovementError> {
        cfg.validate()?;
        Ok(match &cfg.lexicon_path {
            Some(p) => LexiconScorer::new(Lexicon::load(p)?),
            None => LexiconScorer::bundled(),
        })
    }

    /// Raw weighted hit count.
    pub fn hits(&self, text: &str) -> f64 {
        let tagger = Tagger::shared();
        let w = &self.weights;
        text::words(text)
            .iter()
            .map(|word| {
                if DIRECTIONAL.contains(&word.as_str()) {
                    w.preposition
                } else if self.lexicon.adjectives.contains(word) || self.lexicon.adverbs.contains(word) {
                    w.modifier
                } else if self.lexicon.verbs.contains(&tagger.lemma(word)) {
                    w.verb
                } else {
                    0.0
                }
            })
            .sum()
    }
}

impl MovementScorer for LexiconScorer {
    fn score(&self, text: &str) -> Result<f64, MovementError> {
        if text.trim().is_empty() {
            return Err(MovementError::EmptyText);
        }
        let h = self.hits(text);
        Ok(h / (h + self.weights.saturation))
    }
}

/// Score with the bundled lexicon scorer.
pub fn score_movement(text: &str) -> Result<f64, MovementError> {
    static SCORER: OnceLock<LexiconScorer> = OnceLock::new();
    SCORER.get_or_init(LexiconScorer::bundled).score(text)
}

/// Statements scoring strictly above the configured threshold, in order.
pub fn filter_movement(stmts: Vec<Statement>, cfg: &MovementScorerConfig) -> Vec<Statement> {
    stmts.into_iter().filter(|s| s.movement_score > cfg.threshold).collect()
}
