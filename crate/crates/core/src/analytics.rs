//! Detail-view aggregates: place co-occurrence pairs, bi-gram lists and the
//! monthly two-sided histogram.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::{BinScale, Binner};
use crate::breaks::{compute_breaks, BreaksError, ClassBreaks, Method};
use crate::corpus::{MovementClass, Statement};
use crate::text::is_stopword;

pub const DEFAULT_BIGRAM_LIMIT: usize = 10;
pub const MAX_BIGRAM_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("time range start is after its end")]
    BadRange,
    #[error("bigram limit {0} exceeds {MAX_BIGRAM_LIMIT}")]
    BadLimit(usize),
    #[error(transparent)]
    Breaks(#[from] BreaksError),
}

/// Unordered pair with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlacePair<K> {
    pub a: K,
    pub b: K,
    pub weight: u64,
}

impl<K: Ord> PlacePair<K> {
    /// Canonical pair of two distinct endpoints, or `None` for a self-loop.
    pub fn new(x: K, y: K, weight: u64) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(PlacePair { a: x, b: y, weight }),
            std::cmp::Ordering::Greater => Some(PlacePair { a: y, b: x, weight }),
            std::cmp::Ordering::Equal => None,
        }
    }
}

fn pairs_of<K: Ord + Clone>(items: &BTreeSet<K>) -> Vec<(K, K)> {
    let v: Vec<&K> = items.iter().collect();
    let mut out = Vec::with_capacity(v.len() * v.len().saturating_sub(1) / 2);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            out.push((v[i].clone(), v[j].clone()));
        }
    }
    out
}

/// All unordered pairs over the statement's distinct places, weight 1 each.
pub fn place_pairs(stmt: &Statement) -> BTreeSet<PlacePair<u64>> {
    let ids: BTreeSet<u64> = stmt.places.iter().map(|m| m.place.place_id).collect();
    pairs_of(&ids).into_iter().map(|(a, b)| PlacePair { a, b, weight: 1 }).collect()
}

/// Bin-level pair with its weight class and endpoint centroids (`[lon, lat]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub a: String,
    pub b: String,
    pub weight: u64,
    pub class: usize,
    pub a_centroid: [f64; 2],
    pub b_centroid: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connections {
    pub connections: Vec<Connection>,
    pub breaks: Option<ClassBreaks<f64>>,
}

/// Pairs lifted to bins, restricted to those touching `selected`, weighted
/// by distinct statements. Sorted by weight descending then endpoints.
pub fn bin_pairs<'a, I>(stmts: I, scale: BinScale, selected: &BTreeSet<String>, binner: &Binner) -> Vec<PlacePair<String>>
where
    I: IntoIterator<Item = &'a Statement>,
{
    let mut weights: HashMap<(String, String), u64> = HashMap::new();
    for s in stmts {
        let bins = binner.statement_bins(s, scale);
        for (a, b) in pairs_of(&bins) {
            if selected.contains(&a) || selected.contains(&b) {
                *weights.entry((a, b)).or_default() += 1;
            }
        }
    }
    let mut out: Vec<PlacePair<String>> =
        weights.into_iter().map(|((a, b), weight)| PlacePair { a, b, weight }).collect();
    out.sort_by(|x, y| y.weight.cmp(&x.weight).then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b))));
    out
}

/// [`bin_pairs`] with weights classified by `method`/`k` and endpoint
/// centroids attached.
pub fn aggregate_connections(
    stmts: &[&Statement],
    scale: BinScale,
    selected: &BTreeSet<String>,
    binner: &Binner,
    method: Method,
    k: usize,
) -> Result<Connections, AnalyticsError> {
    let pairs = bin_pairs(stmts.iter().copied(), scale, selected, binner);
    if pairs.is_empty() {
        return Ok(Connections { connections: Vec::new(), breaks: None });
    }
    let weights: Vec<f64> = pairs.iter().map(|p| p.weight as f64).collect();
    let breaks = compute_breaks(&weights, method, k)?;

    let mut centroids: HashMap<String, [f64; 2]> = HashMap::new();
    let mut fallback: HashMap<String, BTreeMap<u64, [f64; 2]>> = HashMap::new();
    let endpoints: BTreeSet<&str> = pairs.iter().flat_map(|p| [p.a.as_str(), p.b.as_str()]).collect();
    for id in &endpoints {
        if let Some(c) = binner.centroid(scale, id) {
            centroids.insert(id.to_string(), c);
        }
    }
    if centroids.len() < endpoints.len() {
        for s in stmts {
            for m in &s.places {
                if let Ok(a) = binner.assign(&m.place, scale) {
                    if endpoints.contains(a.bin_id.as_str()) && !centroids.contains_key(&a.bin_id) {
                        fallback.entry(a.bin_id).or_default().insert(m.place.place_id, [m.place.lon, m.place.lat]);
                    }
                }
            }
        }
        for (id, pts) in fallback {
            let n = pts.len() as f64;
            let (x, y) = pts.values().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
            centroids.insert(id, [x / n, y / n]);
        }
    }

    let connections = pairs
        .into_iter()
        .map(|p| Connection {
            class: breaks.classify(p.weight as f64),
            a_centroid: centroids[&p.a],
            b_centroid: centroids[&p.b],
            a: p.a,
            b: p.b,
            weight: p.weight,
        })
        .collect();
    Ok(Connections { connections, breaks: Some(breaks) })
}

// ---------------------------------------------------------------------------
// Bi-grams

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigramCount {
    pub bigram: (String, String),
    pub count: u64,
}

/// Parse "gold smuggling" or "gold_smuggling" into a bi-gram key.
pub fn parse_bigram(s: &str) -> Option<(String, String)> {
    let mut parts = s.split(|c: char| c.is_whitespace() || c == '_' || c == '+').filter(|p| !p.is_empty());
    let (a, b) = (parts.next()?, parts.next()?);
    if parts.next().is_some() {
        return None;
    }
    Some((a.to_lowercase(), b.to_lowercase()))
}

/// Adjacent non-stopword token pairs of one statement, in text order.
pub fn statement_bigrams(stmt: &Statement) -> impl Iterator<Item = (&str, &str)> {
    stmt.tokens
        .windows(2)
        .filter(|w| !is_stopword(&w[0]) && !is_stopword(&w[1]))
        .map(|w| (w[0].as_str(), w[1].as_str()))
}

/// Most frequent bi-grams, counted per occurrence, ties broken
/// alphabetically.
pub fn top_bigrams<'a, I>(
    stmts: I,
    excluded: &BTreeSet<(String, String)>,
    limit: usize,
) -> Result<Vec<BigramCount>, AnalyticsError>
where
    I: IntoIterator<Item = &'a Statement>,
{
    if limit > MAX_BIGRAM_LIMIT {
        return Err(AnalyticsError::BadLimit(limit));
    }
    let mut counts: HashMap<(&str, &str), u64> = HashMap::new();
    for s in stmts {
        for bg in statement_bigrams(s) {
            *counts.entry(bg).or_default() += 1;
        }
    }
    let mut ranked: Vec<((&str, &str), u64)> = counts
        .into_iter()
        .filter(|((a, b), _)| !excluded.contains(&(a.to_string(), b.to_string())))
        .collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    Ok(ranked
        .into_iter()
        .take(limit)
        .map(|((a, b), count)| BigramCount { bigram: (a.to_string(), b.to_string()), count })
        .collect())
}

// ---------------------------------------------------------------------------
// Histogram

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(t: &DateTime<Utc>) -> YearMonth {
        YearMonth { year: t.year(), month: t.month() }
    }

    pub fn next(self) -> YearMonth {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad year-month {s:?}");
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        let ym = YearMonth { year: y.parse().map_err(|_| bad())?, month: m.parse().map_err(|_| bad())? };
        if (1..=12).contains(&ym.month) {
            Ok(ym)
        } else {
            Err(bad())
        }
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

impl TryFrom<String> for YearMonth {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalBucket {
    pub month: YearMonth,
    pub normal_count: u64,
    pub impaired_count: u64,
}

impl TemporalBucket {
    pub fn total(&self) -> u64 {
        self.normal_count + self.impaired_count
    }
}

/// One bucket per calendar month touching `[t0, t1]`, oldest first.
/// Statements outside the range are ignored; unlabeled ones count as normal.
pub fn temporal_histogram<'a, I>(
    stmts: I,
    t0: DateTime<Utc>,
    t1: DateTime<Utc>,
) -> Result<Vec<TemporalBucket>, AnalyticsError>
where
    I: IntoIterator<Item = &'a Statement>,
{
    if t0 > t1 {
        return Err(AnalyticsError::BadRange);
    }
    let first = YearMonth::of(&t0);
    let last = YearMonth::of(&t1);
    let mut buckets = Vec::new();
    let mut index = HashMap::new();
    let mut m = first;
    while m <= last {
        index.insert(m, buckets.len());
        buckets.push(TemporalBucket { month: m, normal_count: 0, impaired_count: 0 });
        m = m.next();
    }
    for s in stmts {
        if s.published_at < t0 || s.published_at > t1 {
            continue;
        }
        let b = &mut buckets[index[&YearMonth::of(&s.published_at)]];
        match s.label {
            Some(MovementClass::Impaired) => b.impaired_count += 1,
            _ => b.normal_count += 1,
        }
    }
    Ok(buckets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, Document, Source};
    use crate::geoparse::{PlaceMention, PlaceRef};

    fn place(id: u64, name: &str, cc: &str, a1: &str, lat: f64, lon: f64) -> PlaceRef {
        PlaceRef {
            place_id: id,
            name: name.into(),
            lat,
            lon,
            feature_class: 'P',
            country_code: cc.into(),
            admin1_code: a1.into(),
        }
    }

    fn stmt(id: &str, date: &str, text: &str, label: MovementClass, places: &[PlaceRef]) -> Statement {
        let doc = Document {
            doc_id: id.into(),
            source: Source::News,
            published_at: parse_timestamp(date).unwrap(),
            title: None,
            body: text.into(),
            url: None,
        };
        let mut s = Statement::new(id, &doc, text);
        s.label = Some(label);
        s.places = places
            .iter()
            .map(|p| PlaceMention { start: 0, end: 0, surface: p.name.clone(), place: p.clone(), confidence: 1.0 })
            .collect();
        s
    }

    fn mumbai() -> PlaceRef {
        place(1275339, "Mumbai", "IN", "MH", 19.07, 72.88)
    }

    fn chennai() -> PlaceRef {
        place(1264527, "Chennai", "IN", "TN", 13.08, 80.27)
    }

    #[test]
    fn three_places_three_pairs() {
        let syd = place(1, "Sydney", "AU", "02", -33.87, 151.21);
        let ny = place(2, "New York", "US", "NY", 40.71, -74.01);
        let lon = place(3, "London", "GB", "ENG", 51.51, -0.13);
        let s = stmt("s", "2019-10-01", "travelling from Sydney to New York and London", MovementClass::Normal, &[syd, ny, lon.clone(), lon]);
        let got: Vec<(u64, u64)> = place_pairs(&s).into_iter().map(|p| (p.a, p.b)).collect();
        assert_eq!(got, [(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn fewer_than_two_places() {
        let s = stmt("s", "2019-10-01", "nothing here at all", MovementClass::Normal, &[]);
        assert!(place_pairs(&s).is_empty());
        let s = stmt("s", "2019-10-01", "only Mumbai here", MovementClass::Normal, &[mumbai(), mumbai()]);
        assert!(place_pairs(&s).is_empty());
    }

    #[test]
    fn canonical_pair() {
        assert_eq!(PlacePair::new("b", "a", 1), PlacePair::new("a", "b", 1));
        assert!(PlacePair::new("a", "a", 1).is_none());
    }

    #[test]
    fn maharashtra_tamil_nadu_connection() {
        let b = Binner::default();
        let s = stmt("s", "2019-10-01", "gold smuggled from Mumbai to Chennai", MovementClass::Impaired, &[mumbai(), chennai()]);
        let sel: BTreeSet<String> = ["IN.TN".to_string()].into();
        let c = aggregate_connections(&[&s], BinScale::Admin1, &sel, &b, Method::EqualInterval, 3).unwrap();
        assert_eq!(c.connections.len(), 1);
        let k = &c.connections[0];
        assert_eq!((k.a.as_str(), k.b.as_str(), k.weight), ("IN.MH", "IN.TN", 1));
        assert_eq!(k.a_centroid, [72.88, 19.07]);

        let same = aggregate_connections(&[&s], BinScale::Country, &["IN".to_string()].into(), &b, Method::Jenks, 3).unwrap();
        assert!(same.connections.is_empty());
        let none = aggregate_connections(&[&s], BinScale::Admin1, &["FR.IDF".to_string()].into(), &b, Method::Jenks, 3).unwrap();
        assert!(none.connections.is_empty());
    }

    #[test]
    fn connection_weights_count_statements() {
        let b = Binner::default();
        let s1 = stmt("a", "2019-10-01", "x y z", MovementClass::Impaired, &[mumbai(), chennai(), chennai()]);
        let s2 = stmt("b", "2019-10-02", "x y z", MovementClass::Impaired, &[chennai(), mumbai()]);
        let p = bin_pairs([&s1, &s2], BinScale::Admin1, &["IN.MH".to_string()].into(), &b);
        assert_eq!(p, [PlacePair { a: "IN.MH".to_string(), b: "IN.TN".to_string(), weight: 2 }]);
    }

    #[test]
    fn bigrams_rank_and_exclusion() {
        let mut v = Vec::new();
        for i in 0..5 {
            v.push(stmt(&format!("g{i}"), "2019-10-01", "Police seized gold smuggling ring", MovementClass::Impaired, &[]));
        }
        v.push(stmt("x", "2019-10-01", "Customs officers seized cash", MovementClass::Normal, &[]));
        let refs: Vec<&Statement> = v.iter().collect();
        let top = top_bigrams(refs.iter().copied(), &BTreeSet::new(), 10).unwrap();
        // "police seized", "seized gold", "gold smuggling", "smuggling ring" all 5x; alphabetical
        assert_eq!(top[0].bigram, ("gold".into(), "smuggling".into()));
        assert_eq!(top[0].count, 5);
        let excluded: BTreeSet<_> = [top[0].bigram.clone()].into();
        let next = top_bigrams(refs.iter().copied(), &excluded, 10).unwrap();
        assert_eq!(next[0], top[1]);
        assert_eq!(&next[..], &top[1..]);
        assert!(top_bigrams(std::iter::empty(), &BTreeSet::new(), 10).unwrap().is_empty());
        assert_eq!(top_bigrams(refs.iter().copied(), &BTreeSet::new(), 21), Err(AnalyticsError::BadLimit(21)));
    }

    #[test]
    fn bigrams_skip_stopwords() {
        let s = stmt("s", "2019-10-01", "Gold smuggling to the Chennai port rose", MovementClass::Impaired, &[]);
        let got: Vec<_> = statement_bigrams(&s).collect();
        assert_eq!(got, [("gold", "smuggling"), ("chennai", "port"), ("port", "rose")]);
        assert_eq!(parse_bigram("Gold smuggling"), Some(("gold".into(), "smuggling".into())));
        assert_eq!(parse_bigram("gold_smuggling"), Some(("gold".into(), "smuggling".into())));
        assert_eq!(parse_bigram("gold"), None);
    }

    #[test]
    fn october_histogram() {
        let v = [
            stmt("a", "2019-10-03", "x y z", MovementClass::Impaired, &[]),
            stmt("b", "2019-10-09", "x y z", MovementClass::Impaired, &[]),
            stmt("c", "2019-10-30", "x y z", MovementClass::Normal, &[]),
            stmt("d", "2020-01-05", "x y z", MovementClass::Normal, &[]),
        ];
        let t0 = parse_timestamp("2019-09-15").unwrap();
        let t1 = parse_timestamp("2019-12-31").unwrap();
        let h = temporal_histogram(&v, t0, t1).unwrap();
        let months: Vec<String> = h.iter().map(|b| b.month.to_string()).collect();
        assert_eq!(months, ["2019-09", "2019-10", "2019-11", "2019-12"]);
        assert_eq!((h[1].normal_count, h[1].impaired_count), (1, 2));
        assert_eq!(h[0].total() + h[2].total() + h[3].total(), 0);
        assert_eq!(temporal_histogram(&v, t1, t0), Err(AnalyticsError::BadRange));
        assert_eq!(serde_json::to_string(&h[1].month).unwrap(), "\"2019-10\"");
        let back: YearMonth = serde_json::from_str("\"2019-10\"").unwrap();
        assert_eq!(back, h[1].month);
    }
}
