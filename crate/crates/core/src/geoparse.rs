//! Gazetteer-backed toponym recognition and resolution.

use std::cmp::Reverse;
use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Source;
use crate::metrics::precision_recall_f1;
use crate::text::{self, Token};

/// Longest toponym, in word tokens.
pub const MAX_TOPONYM_TOKENS: usize = 4;

/// Common words that double as place names. They only count as toponyms
/// when capitalized in edited text, and never in microblog text.
pub const DEFAULT_STOPLIST: &[&str] = &[
    "of", "nice", "mobile", "reading", "bath", "split", "us", "may", "hope", "orange", "chance",
    "march",
];

#[derive(Debug, Error)]
pub enum GeoparseError {
    #[error("gazetteer {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gazetteer row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("gold corpus has no annotated places")]
    EmptyGold,
    #[error("gold record {record}: {reason}")]
    BadGold { record: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub place_id: u64,
    pub name: String,
    pub alternate_names: Vec<String>,
    pub lat: f64,
    pub lon: f64,
    /// GeoNames feature class: `A` administrative, `P` populated place, ...
    pub feature_class: char,
    pub country_code: String,
    pub admin1_code: String,
    pub population: u64,
}

/// The gazetteer attributes a mention carries with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceRef {
    pub place_id: u64,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub feature_class: char,
    pub country_code: String,
    /// Empty for country-level entries.
    pub admin1_code: String,
}

impl From<&GazetteerEntry> for PlaceRef {
    fn from(e: &GazetteerEntry) -> Self {
        PlaceRef {
            place_id: e.place_id,
            name: e.name.clone(),
            lat: e.lat,
            lon: e.lon,
            feature_class: e.feature_class,
            country_code: e.country_code.clone(),
            admin1_code: e.admin1_code.clone(),
        }
    }
}

/// A resolved toponym; `start..end` are byte offsets into the statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceMention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub place: PlaceRef,
    pub confidence: f64,
}

/// Lowercased, single-space-joined word tokens: the lookup key form.
pub fn normalize_key(name: &str) -> String {
    text::words(name).join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    by_id: HashMap<u64, usize>,
    by_key: HashMap<String, Vec<usize>>,
}

fn field<'a>(cols: &[&'a str], i: usize, row: usize, name: &str) -> Result<&'a str, GeoparseError> {
    cols.get(i).map(|s| s.trim()).ok_or_else(|| GeoparseError::MalformedRow {
        row,
        reason: format!("missing column `{name}`"),
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, row: usize, name: &str) -> Result<T, GeoparseError> {
    s.parse().map_err(|_| GeoparseError::MalformedRow { row, reason: format!("bad {name} {s:?}") })
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Gazetteer, GeoparseError> {
        let mut g = Gazetteer::default();
        for (i, e) in entries.into_iter().enumerate() {
            g.insert(e, i + 1)?;
        }
        Ok(g)
    }

    fn insert(&mut self, e: GazetteerEntry, row: usize) -> Result<(), GeoparseError> {
        let bad = |reason: String| GeoparseError::MalformedRow { row, reason };
        if e.name.trim().is_empty() {
            return Err(bad("empty name".into()));
        }
        if !(-90.0..=90.0).contains(&e.lat) {
            return Err(bad(format!("latitude {} out of range", e.lat)));
        }
        if !(-180.0..=180.0).contains(&e.lon) {
            return Err(bad(format!("longitude {} out of range", e.lon)));
        }
        if e.country_code.len() != 2 || !e.country_code.chars().all(|c| c.is_ascii_uppercase()) {
            return Err(bad(format!("bad country code {:?}", e.country_code)));
        }
        if self.by_id.contains_key(&e.place_id) {
            return Err(bad(format!("duplicate place_id {}", e.place_id)));
        }
        let idx = self.entries.len();
        let mut keys: Vec<String> = std::iter::once(&e.name)
            .chain(&e.alternate_names)
            .map(|n| normalize_key(n))
            .filter(|k| !k.is_empty())
            .collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            if k.split(' ').count() <= MAX_TOPONYM_TOKENS {
                self.by_key.entry(k).or_default().push(idx);
            }
        }
        self.by_id.insert(e.place_id, idx);
        self.entries.push(e);
        Ok(())
    }

    /// Parse the tab-separated gazetteer format. A header row starting with
    /// `place_id`, blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Gazetteer, GeoparseError> {
        let mut g = Gazetteer::default();
        for (i, line) in reader.lines().enumerate() {
            let row = i + 1;
            let line = line.map_err(|source| GeoparseError::File { path: format!("row {row}"), source })?;
            if line.trim().is_empty() || line.starts_with('#') || line.starts_with("place_id") {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 9 {
                return Err(GeoparseError::MalformedRow {
                    row,
                    reason: format!("expected 9 columns, found {}", cols.len()),
                });
            }
            let fc = field(&cols, 5, row, "feature_class")?;
            let mut fc_chars = fc.chars();
            let feature_class = match (fc_chars.next(), fc_chars.next()) {
                (Some(c), None) => c.to_ascii_uppercase(),
                _ => {
                    return Err(GeoparseError::MalformedRow { row, reason: format!("bad feature class {fc:?}") })
                }
            };
            let entry = GazetteerEntry {
                place_id: parse_num(field(&cols, 0, row, "place_id")?, row, "place_id")?,
                name: field(&cols, 1, row, "name")?.to_string(),
                alternate_names: field(&cols, 2, row, "alternate_names")?
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
                lat: parse_num(field(&cols, 3, row, "lat")?, row, "lat")?,
                lon: parse_num(field(&cols, 4, row, "lon")?, row, "lon")?,
                feature_class,
                country_code: field(&cols, 6, row, "country_code")?.to_string(),
                admin1_code: field(&cols, 7, row, "admin1_code")?.to_string(),
                population: parse_num(field(&cols, 8, row, "population")?, row, "population")?,
            };
            g.insert(entry, row)?;
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Gazetteer, GeoparseError> {
        let f = std::fs::File::open(path)
            .map_err(|source| GeoparseError::File { path: path.display().to_string(), source })?;
        Gazetteer::from_reader(std::io::BufReader::new(f))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, place_id: u64) -> Option<&GazetteerEntry> {
        self.by_id.get(&place_id).map(|&i| &self.entries[i])
    }

    /// Entries whose name or alternate name normalizes to the same key.
    pub fn lookup(&self, name: &str) -> Vec<&GazetteerEntry> {
        self.by_key
            .get(&normalize_key(name))
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }
}

/// A recognized toponym span and its candidate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ToponymMatch {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub candidates: Vec<u64>,
}

/// Recognition policy for ambiguous common words.
#[derive(Debug, Clone)]
pub struct Recognizer {
    stoplist: HashSet<String>,
}

impl Default for Recognizer {
    fn default() -> Self {
        Recognizer::with_stoplist(DEFAULT_STOPLIST.iter().copied())
    }
}

fn joined_by_space(text: &str, a: &Token<'_>, b: &Token<'_>) -> bool {
    text[a.end..b.start].chars().all(char::is_whitespace)
}

impl Recognizer {
    pub fn with_stoplist<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Recognizer { stoplist: words.into_iter().map(str::to_lowercase).collect() }
    }

    fn admissible(&self, key: &str, surface: &str, source: Source) -> bool {
        if !self.stoplist.contains(key) {
            return true;
        }
        match source {
            Source::Microblog => false,
            Source::News | Source::Scientific => surface.chars().next().is_some_and(char::is_uppercase),
        }
    }

    /// Case-insensitive longest-match lookup of up to four-token n-grams.
    ///
    /// Overlaps are resolved in favour of the longer span, then the earlier
    /// one; spans nested in an accepted match are discarded.
    pub fn recognize(&self, text: &str, gaz: &Gazetteer, source: Source) -> Vec<ToponymMatch> {
        let tokens = text::tokenize(text);
        let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut found: Vec<(usize, usize, &Vec<usize>)> = Vec::new();
        for i in 0..tokens.len() {
            let mut key = String::new();
            for j in i..(i + MAX_TOPONYM_TOKENS).min(tokens.len()) {
                if j > i {
                    if !joined_by_space(text, &tokens[j - 1], &tokens[j]) {
                        break;
                    }
                    key.push(' ');
                }
                key.push_str(&lower[j]);
                if let Some(ix) = gaz.by_key.get(&key) {
                    let surface = &text[tokens[i].start..tokens[j].end];
                    if self.admissible(&key, surface, source) {
                        found.push((i, j + 1, ix));
                    }
                }
            }
        }
        found.sort_by_key(|&(s, e, _)| (Reverse(e - s), s));
        let mut taken = vec![false; tokens.len()];
        let mut out = Vec::new();
        for (s, e, ix) in found {
            if taken[s..e].iter().any(|&t| t) {
                continue;
            }
            taken[s..e].iter_mut().for_each(|t| *t = true);
            let (start, end) = (tokens[s].start, tokens[e - 1].end);
            out.push(ToponymMatch {
                start,
                end,
                surface: text[start..end].to_string(),
                candidates: ix.iter().map(|&i| gaz.entries[i].place_id).collect(),
            });
        }
        out.sort_by_key(|m| m.start);
        out
    }
}

/// Recognize with the default stoplist.
pub fn recognize_toponyms(text: &str, gaz: &Gazetteer, source: Source) -> Vec<ToponymMatch> {
    Recognizer::default().recognize(text, gaz, source)
}

/// Which criterion separated the winner from the runner-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Unique,
    ContextCountry,
    AdminClass,
    Population,
    PlaceId,
}

impl Decision {
    pub fn confidence(self) -> f64 {
        match self {
            Decision::Unique => 1.0,
            Decision::ContextCountry => 0.9,
            Decision::AdminClass => 0.8,
            Decision::Population => 0.7,
            Decision::PlaceId => 0.5,
        }
    }
}

/// Pick one candidate: shared country with the context first, then
/// administrative over populated places, then population, then lowest id.
///
/// Returns `None` only for an empty candidate list.
pub fn resolve_toponym<'g>(
    candidates: &[&'g GazetteerEntry],
    context: &[PlaceMention],
) -> Option<(&'g GazetteerEntry, Decision)> {
    let countries: HashSet<&str> = context.iter().map(|m| m.place.country_code.as_str()).collect();
    let rank = |e: &GazetteerEntry| {
        (
            Reverse(countries.contains(e.country_code.as_str())),
            Reverse(e.feature_class == 'A'),
            Reverse(e.population),
            e.place_id,
        )
    };
    let mut ranked: Vec<&GazetteerEntry> = candidates.to_vec();
    ranked.sort_by_key(|e| rank(e));
    ranked.dedup_by_key(|e| e.place_id);
    let best = *ranked.first()?;
    let decision = match ranked.get(1) {
        None => Decision::Unique,
        Some(second) => {
            let (a, b) = (rank(best), rank(second));
            if a.0 != b.0 {
                Decision::ContextCountry
            } else if a.1 != b.1 {
                Decision::AdminClass
            } else if a.2 != b.2 {
                Decision::Population
            } else {
                Decision::PlaceId
            }
        }
    };
    Some((best, decision))
}

/// Geoparser: recognizer plus resolution against one gazetteer.
#[derive(Debug, Clone)]
pub struct Geoparser {
    pub gazetteer: Gazetteer,
    pub recognizer: Recognizer,
}

impl Geoparser {
    pub fn new(gazetteer: Gazetteer) -> Self {
        Geoparser { gazetteer, recognizer: Recognizer::default() }
    }

    /// Recognize and resolve all toponyms in `text`.
    ///
    /// Unambiguous matches are resolved first and serve as context for the
    /// ambiguous ones, which are then resolved in text order.
    pub fn parse(&self, text: &str, source: Source) -> Vec<PlaceMention> {
        let matches = self.recognizer.recognize(text, &self.gazetteer, source);
        let mut resolved: Vec<Option<PlaceMention>> = vec![None; matches.len()];
        let mut context: Vec<PlaceMention> = Vec::new();
        let mention = |m: &ToponymMatch, e: &GazetteerEntry, d: Decision| PlaceMention {
            start: m.start,
            end: m.end,
            surface: m.surface.clone(),
            place: PlaceRef::from(e),
            confidence: d.confidence(),
        };
        for (i, m) in matches.iter().enumerate() {
            let cands: Vec<&GazetteerEntry> = m.candidates.iter().filter_map(|&id| self.gazetteer.get(id)).collect();
            if let [only] = cands.as_slice() {
                let pm = mention(m, only, Decision::Unique);
                context.push(pm.clone());
                resolved[i] = Some(pm);
            }
        }
        for (i, m) in matches.iter().enumerate() {
            if resolved[i].is_some() {
                continue;
            }
            let cands: Vec<&GazetteerEntry> = m.candidates.iter().filter_map(|&id| self.gazetteer.get(id)).collect();
            if let Some((e, d)) = resolve_toponym(&cands, &context) {
                let pm = mention(m, e, d);
                context.push(pm.clone());
                resolved[i] = Some(pm);
            }
        }
        resolved.into_iter().flatten().collect()
    }
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub start: usize,
    pub end: usize,
    pub place_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDocument {
    pub text: String,
    pub source: Source,
    pub places: Vec<GoldSpan>,
}

#[derive(Deserialize)]
struct RawGoldPlace {
    surface: Option<String>,
    start: Option<usize>,
    end: Option<usize>,
    place_id: u64,
}

#[derive(Deserialize)]
struct RawGold {
    text: String,
    #[serde(default = "default_gold_source")]
    source: Source,
    #[serde(default)]
    places: Vec<RawGoldPlace>,
}

fn default_gold_source() -> Source {
    Source::News
}

/// Parse the gold JSON-lines format. Each place gives either explicit
/// `start`/`end` byte offsets or a `surface` string, located at its first
/// occurrence after the previous annotation.
pub fn parse_gold(src: &str) -> Result<Vec<GoldDocument>, GeoparseError> {
    let mut docs = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let record = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| GeoparseError::BadGold { record, reason };
        let raw: RawGold = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let mut cursor = 0;
        let mut places = Vec::new();
        for p in raw.places {
            let (start, end) = match (p.start, p.end, &p.surface) {
                (Some(s), Some(e), _) => (s, e),
                (_, _, Some(surface)) => {
                    let at = raw.text[cursor..]
                        .find(surface.as_str())
                        .ok_or_else(|| bad(format!("surface {surface:?} not found")))?;
                    (cursor + at, cursor + at + surface.len())
                }
                _ => return Err(bad("place needs start/end or surface".into())),
            };
            if start >= end || end > raw.text.len() || !raw.text.is_char_boundary(start) || !raw.text.is_char_boundary(end) {
                return Err(bad(format!("span {start}..{end} outside text")));
            }
            cursor = end;
            places.push(GoldSpan { start, end, place_id: p.place_id });
        }
        docs.push(GoldDocument { text: raw.text, source: raw.source, places });
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoparseScores {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Correctly recognized spans that also resolved to the gold place.
    pub resolved_correct: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub resolution_accuracy: f64,
}

impl GeoparseScores {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, resolved_correct: u64) -> Self {
        let (precision, recall, f1) = precision_recall_f1::<f64>(tp, fp, fn_);
        let resolution_accuracy = if tp == 0 { 0.0 } else { resolved_correct as f64 / tp as f64 };
        GeoparseScores { tp, fp, fn_, resolved_correct, precision, recall, f1, resolution_accuracy }
    }
}

/// Score predictions against gold spans: recognition by exact span match,
/// resolution accuracy over the correctly recognized spans.
pub fn score_geoparse(gold: &[Vec<GoldSpan>], predicted: &[Vec<GoldSpan>]) -> Result<GeoparseScores, GeoparseError> {
    if gold.iter().all(Vec::is_empty) {
        return Err(GeoparseError::EmptyGold);
    }
    let (mut tp, mut fp, mut fn_, mut ok) = (0, 0, 0, 0);
    let empty = Vec::new();
    for (i, g) in gold.iter().enumerate() {
        let p = predicted.get(i).unwrap_or(&empty);
        let gold_spans: HashMap<(usize, usize), u64> = g.iter().map(|s| ((s.start, s.end), s.place_id)).collect();
        let pred_spans: HashSet<(usize, usize)> = p.iter().map(|s| (s.start, s.end)).collect();
        for s in p {
            match gold_spans.get(&(s.start, s.end)) {
                Some(&id) => {
                    tp += 1;
                    if id == s.place_id {
                        ok += 1;
                    }
                }
                None => fp += 1,
            }
        }
        fn_ += gold_spans.keys().filter(|k| !pred_spans.contains(k)).count() as u64;
    }
    Ok(GeoparseScores::from_counts(tp, fp, fn_, ok))
}

/// Run the geoparser over a gold corpus and score it.
pub fn evaluate_geoparser(gold: &[GoldDocument], parser: &Geoparser) -> Result<GeoparseScores, GeoparseError> {
    let gold_spans: Vec<Vec<GoldSpan>> = gold.iter().map(|d| d.places.clone()).collect();
    let predicted: Vec<Vec<GoldSpan>> = gold
        .iter()
        .map(|d| {
            parser
                .parse(&d.text, d.source)
                .into_iter()
                .map(|m| GoldSpan { start: m.start, end: m.end, place_id: m.place.place_id })
                .collect()
        })
        .collect();
    score_geoparse(&gold_spans, &predicted)
}
