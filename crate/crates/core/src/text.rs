//! Word tokenization shared by segmentation, tagging, geoparsing and indexing.

use std::collections::HashSet;
use std::sync::OnceLock;

/// A word token with byte offsets into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Split `text` into word tokens.
///
/// A word is a run of alphanumerics, possibly joined by single apostrophes
/// ("o'clock"). Negative contractions and possessives are split off as their
/// own tokens: "didn't" gives "did" + "n't", "India's" gives "India" + "'s".
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if !c.is_alphanumeric() {
            chars.next();
            continue;
        }
        let mut end = start;
        while let Some(&(i, c)) = chars.peek() {
            if c.is_alphanumeric() {
                end = i + c.len_utf8();
                chars.next();
            } else if is_apostrophe(c) {
                // keep the apostrophe only when a letter follows
                let next = text[i + c.len_utf8()..].chars().next();
                if next.is_some_and(char::is_alphanumeric) {
                    end = i + c.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            } else {
                break;
            }
        }
        push_word(text, start, end, &mut out);
    }
    out
}

fn push_word<'a>(text: &'a str, start: usize, end: usize, out: &mut Vec<Token<'a>>) {
    let word = &text[start..end];
    let lower = word.to_lowercase();
    let split_at = if lower.len() > 3 && (lower.ends_with("n't") || lower.ends_with("n\u{2019}t")) {
        // "n" + apostrophe + "t"
        let tail = if lower.ends_with("n't") { 3 } else { 5 };
        Some(end - tail)
    } else if lower.len() > 2 && (lower.ends_with("'s") || lower.ends_with("\u{2019}s")) {
        let tail = if lower.ends_with("'s") { 2 } else { 4 };
        Some(end - tail)
    } else {
        None
    };
    match split_at {
        Some(mid) if mid > start => {
            out.push(Token { text: &text[start..mid], start, end: mid });
            out.push(Token { text: &text[mid..end], start: mid, end });
        }
        _ => out.push(Token { text: word, start, end }),
    }
}

/// Lowercased word tokens.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text.to_lowercase()).collect()
}

static STOPWORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();

/// The bundled English stopword list.
pub fn stopwords() -> &'static HashSet<&'static str> {
    STOPWORDS.get_or_init(|| {
        include_str!("../data/stopwords.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}
