//! Canonical data model, record parsing, text cleaning and sentence
//! segmentation.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geoparse::PlaceMention;
use crate::text;

/// Minimum number of word tokens for a sentence to become a statement.
pub const MIN_STATEMENT_TOKENS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    News,
    Microblog,
    Scientific,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::News, Source::Microblog, Source::Scientific];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::News => "news",
            Source::Microblog => "microblog",
            Source::Scientific => "scientific",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "news" => Ok(Source::News),
            "microblog" | "tweet" | "tweets" | "twitter" => Ok(Source::Microblog),
            "scientific" | "science" => Ok(Source::Scientific),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Movement class of a statement that passed the movement threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MovementClass {
    Normal,
    Impaired,
}

impl MovementClass {
    pub const ALL: [MovementClass; 2] = [MovementClass::Normal, MovementClass::Impaired];

    pub fn as_str(self) -> &'static str {
        match self {
            MovementClass::Normal => "normal",
            MovementClass::Impaired => "impaired",
        }
    }
}

impl fmt::Display for MovementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MovementClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(MovementClass::Normal),
            "impaired" => Ok(MovementClass::Impaired),
            other => Err(format!("unknown movement class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: Source,
    pub published_at: DateTime<Utc>,
    pub title: Option<String>,
    pub body: String,
    pub url: Option<String>,
}

/// One sentence-level unit of analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub stmt_id: String,
    pub doc_id: String,
    pub source: Source,
    pub published_at: DateTime<Utc>,
    pub text: String,
    pub movement_score: f64,
    /// Set only once the statement cleared the movement threshold.
    pub label: Option<MovementClass>,
    pub places: Vec<PlaceMention>,
    /// Lowercased word tokens of `text`.
    pub tokens: Vec<String>,
    pub url: Option<String>,
}

impl Statement {
    pub fn new(
        stmt_id: impl Into<String>,
        doc: &Document,
        text: impl Into<String>,
    ) -> Statement {
        let text = text.into();
        let tokens = text::words(&text);
        Statement {
            stmt_id: stmt_id.into(),
            doc_id: doc.doc_id.clone(),
            source: doc.source,
            published_at: doc.published_at,
            text,
            movement_score: 0.0,
            label: None,
            places: Vec::new(),
            tokens,
            url: doc.url.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Cleaning

struct CleanPatterns {
    tags: Regex,
    urls: Regex,
    handles: Regex,
    retweet: Regex,
}

fn patterns() -> &'static CleanPatterns {
    static P: OnceLock<CleanPatterns> = OnceLock::new();
    P.get_or_init(|| CleanPatterns {
        tags: Regex::new(r"<[^<>]*>").unwrap(),
        urls: Regex::new(r"(?i)\b(?:https?://|www\.)\S+").unwrap(),
        handles: Regex::new(r"(?:^|\B)@[A-Za-z0-9_]+:?").unwrap(),
        retweet: Regex::new(r"^\s*RT\b:?").unwrap(),
    })
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&nbsp;", " ")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn clean_once(raw: &str) -> String {
    let p = patterns();
    let s = decode_entities(raw);
    let s = p.tags.replace_all(&s, " ");
    let s = p.urls.replace_all(&s, " ");
    let s = p.handles.replace_all(&s, " ");
    let s = p.retweet.replace(&s, " ");
    let s: String = s
        .chars()
        .map(|c| if c.is_whitespace() { ' ' } else { c })
        .filter(|c| !c.is_control())
        .collect();
    let mut out = String::with_capacity(s.len());
    for word in s.split(' ').filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    fix_punctuation_spacing(&out)
}

/// Removing a tag or handle can leave "Paris !" behind; reattach closing
/// punctuation to the preceding word.
fn fix_punctuation_spacing(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == ' ' && chars.peek().is_some_and(|n| matches!(n, '.' | ',' | '!' | '?' | ';' | ':')) {
            continue;
        }
        out.push(c);
    }
    out
}

/// Strip markup, URLs, user handles, retweet markers and control characters,
/// and collapse whitespace. Case and sentence punctuation are kept.
///
/// An empty result means the text should be dropped.
pub fn clean_text(raw: &str) -> String {
    let mut current = clean_once(raw);
    // every rewrite shortens the text, so this reaches a fixed point
    loop {
        let next = clean_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

// ---------------------------------------------------------------------------
// Segmentation

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "e.g", "i.e",
    "u.s", "u.k", "u.n", "u.s.a", "inc", "ltd", "co", "corp", "gov", "gen", "col", "lt", "sgt",
    "capt", "rep", "sen", "no", "fig", "al", "approx", "jan", "feb", "mar", "apr", "jun", "jul",
    "aug", "sep", "sept", "oct", "nov", "dec",
];

fn is_abbreviation(word: &str) -> bool {
    let w = word.trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    ABBREVIATIONS.contains(&w.as_str())
}

/// Split cleaned text into sentences on terminal punctuation.
///
/// A period following a known abbreviation ("Dr.", "U.S.") does not end a
/// sentence. Text without terminal punctuation is a single sentence.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if matches!(b, b'.' | b'!' | b'?') {
            let mut end = i + 1;
            while end < bytes.len() && matches!(bytes[end], b'.' | b'!' | b'?' | b'"' | b'\'' | b')') {
                end += 1;
            }
            let at_break = end == bytes.len() || bytes[end] == b' ';
            let guarded = b == b'.' && {
                let word = text[start..i].rsplit(' ').next().unwrap_or("");
                is_abbreviation(word)
            };
            if at_break && !guarded {
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    out.push(sentence);
                }
                start = end;
            }
            i = end;
        } else {
            i += 1;
        }
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// One statement per sentence of the (cleaned) body, in document order.
/// Sentences with fewer than [`MIN_STATEMENT_TOKENS`] words are dropped.
pub fn segment_statements(doc: &Document) -> Vec<Statement> {
    segment_with_min_tokens(doc, MIN_STATEMENT_TOKENS)
}

pub fn segment_with_min_tokens(doc: &Document, min_tokens: usize) -> Vec<Statement> {
    split_sentences(&doc.body)
        .into_iter()
        .filter(|s| text::tokenize(s).len() >= min_tokens)
        .enumerate()
        .map(|(i, s)| Statement::new(format!("{}:{}", doc.doc_id, i), doc, s))
        .collect()
}

// ---------------------------------------------------------------------------
// Record parsing

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("bad timestamp {0:?}")]
    BadTimestamp(String),
}

/// Options for [`parse_record`].
#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Substitute `default_date` for unparseable timestamps instead of failing.
    pub lenient: bool,
    pub default_date: NaiveDate,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { lenient: false, default_date: CorpusWindow::default().start }
    }
}

/// Inclusive publication-date window of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Default for CorpusWindow {
    /// August 2019 through mid-November 2020, the span of the source corpora.
    fn default() -> Self {
        CorpusWindow {
            start: NaiveDate::from_ymd_opt(2019, 8, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2020, 11, 14).unwrap(),
        }
    }
}

impl CorpusWindow {
    pub fn contains(&self, t: &DateTime<Utc>) -> bool {
        let d = t.date_naive();
        d >= self.start && d <= self.end
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    source: Option<String>,
    published_at: Option<String>,
    title: Option<String>,
    text: Option<String>,
    url: Option<String>,
}

/// Parse an ISO-8601 date or date-time into UTC. Dates map to midnight.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&t));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).unwrap()))
}

/// Parse one line of the JSON-lines ingestion format.
///
/// `source` is used when the record carries no `source` field of its own.
pub fn parse_record(
    raw_line: &[u8],
    source: Source,
    opts: &ParseOptions,
) -> Result<Document, RecordError> {
    let line = std::str::from_utf8(raw_line)
        .map_err(|e| RecordError::MalformedRecord(format!("invalid UTF-8: {e}")))?;
    let raw: RawRecord = serde_json::from_str(line.trim())
        .map_err(|e| RecordError::MalformedRecord(e.to_string()))?;

    let doc_id = match raw.id {
        Some(serde_json::Value::String(s)) if !s.is_empty() => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(RecordError::MalformedRecord("`id` must be a string".into())),
        None => return Err(RecordError::MissingField("id")),
    };
    let source = match raw.source {
        Some(s) => s.parse().map_err(RecordError::MalformedRecord)?,
        None => source,
    };
    let body = raw.text.ok_or(RecordError::MissingField("text"))?;
    let date = raw.published_at.ok_or(RecordError::MissingField("published_at"))?;
    let published_at = match parse_timestamp(&date) {
        Some(t) => t,
        None if opts.lenient => {
            Utc.from_utc_datetime(&opts.default_date.and_hms_opt(0, 0, 0).unwrap())
        }
        None => return Err(RecordError::BadTimestamp(date)),
    };
    Ok(Document { doc_id, source, published_at, title: raw.title, body, url: raw.url })
}
