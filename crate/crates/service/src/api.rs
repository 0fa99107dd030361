//! Endpoint logic as a pure function of (index snapshot, parameters).

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use geomove_core::analytics::{aggregate_connections, parse_bigram, temporal_histogram, top_bigrams, DEFAULT_BIGRAM_LIMIT};
use geomove_core::binning::aggregate_counts;
use geomove_core::breaks::{compute_breaks, ClassBreaks};
use geomove_core::corpus::parse_timestamp;
use geomove_core::search::{Snapshot, DEFAULT_PAGE_SIZE};
use geomove_core::{BinScale, Method, MovementClass, Query, SearchIndex, Source, Statement};
use serde::Serialize;
use serde_json::{json, Value};

pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub body: Value,
}

impl Response {
    fn ok<T: Serialize>(payload: T) -> Response {
        let mut body = serde_json::to_value(payload).expect("serializable");
        if let Value::Object(map) = &mut body {
            map.insert("api_version".into(), json!(API_VERSION));
        }
        Response { status: 200, body }
    }

    fn error(status: u16, message: impl Into<String>) -> Response {
        Response {
            status,
            body: json!({"api_version": API_VERSION, "error": {"status": status, "message": message.into()}}),
        }
    }

    /// Serialized body; identical inputs give identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.body).expect("serializable")
    }
}

/// Shared state behind every request.
#[derive(Debug)]
pub struct ApiState {
    index: OnceLock<Arc<SearchIndex>>,
    pub threshold: f64,
    pub default_method: Method,
    pub default_k: usize,
}

impl ApiState {
    pub fn new(threshold: f64, default_method: Method, default_k: usize) -> ApiState {
        ApiState { index: OnceLock::new(), threshold, default_method, default_k }
    }

    pub fn with_index(self, index: Arc<SearchIndex>) -> ApiState {
        self.set_index(index);
        self
    }

    /// Publish the index; requests answer 503 until this happens.
    pub fn set_index(&self, index: Arc<SearchIndex>) {
        let _ = self.index.set(index);
    }

    pub fn index(&self) -> Option<&Arc<SearchIndex>> {
        self.index.get()
    }
}

struct BadParam(String);

type Params<'a> = &'a [(String, String)];

fn get<'a>(params: Params<'a>, names: &[&str]) -> Option<&'a str> {
    params.iter().rev().find(|(k, _)| names.contains(&k.as_str())).map(|(_, v)| v.as_str())
}

/// All values of a parameter, split on commas; repeated keys accumulate.
fn list(params: Params<'_>, names: &[&str]) -> Vec<String> {
    params
        .iter()
        .filter(|(k, _)| names.contains(&k.as_str()))
        .flat_map(|(_, v)| v.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_num<T: std::str::FromStr>(params: Params<'_>, name: &str) -> Result<Option<T>, BadParam> {
    get(params, &[name])
        .map(|v| v.trim().parse::<T>().map_err(|_| BadParam(format!("`{name}` must be a non-negative integer, got {v:?}"))))
        .transpose()
}

fn parse_time(v: &str, end_of_day: bool) -> Result<DateTime<Utc>, BadParam> {
    if end_of_day {
        if let Ok(d) = NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d") {
            let next = d.succ_opt().ok_or_else(|| BadParam(format!("bad date {v:?}")))?;
            return Ok(next.and_hms_opt(0, 0, 0).unwrap().and_utc() - Duration::nanoseconds(1));
        }
    }
    parse_timestamp(v).ok_or_else(|| BadParam(format!("bad timestamp {v:?}")))
}

const KNOWN: &[&str] = &[
    "q", "text", "sources", "source", "movement", "movement_class", "from", "to", "scale", "bins", "page",
    "page_size", "method", "k", "exclude", "limit",
];

fn parse_query(params: Params<'_>, threshold: f64, snap: &Snapshot) -> Result<Query, BadParam> {
    if let Some((k, _)) = params.iter().find(|(k, _)| !KNOWN.contains(&k.as_str())) {
        return Err(BadParam(format!("unknown parameter `{k}`")));
    }
    let mut q = Query {
        text: get(params, &["q", "text"]).map(str::trim).filter(|s| !s.is_empty()).map(String::from),
        min_score: Some(threshold),
        ..Query::default()
    };
    for s in list(params, &["sources", "source"]) {
        q.sources.insert(s.parse::<Source>().map_err(BadParam)?);
    }
    for m in list(params, &["movement", "movement_class"]) {
        q.movement_class.insert(m.parse::<MovementClass>().map_err(BadParam)?);
    }
    let from = get(params, &["from"]).map(|v| parse_time(v, false)).transpose()?;
    let to = get(params, &["to"]).map(|v| parse_time(v, true)).transpose()?;
    // an open side is closed with the corpus's own time bounds
    q.time_range = match (from, to, snap.time_bounds()) {
        (None, None, _) => None,
        (Some(a), Some(b), _) => Some((a, b)),
        (a, b, Some((lo, hi))) => Some((a.unwrap_or(lo), b.unwrap_or(hi))),
        (a, b, None) => a.or(b).map(|t| (t, t)),
    };
    if let Some(s) = get(params, &["scale"]) {
        q.scale = s.parse().map_err(BadParam)?;
    }
    q.selected_bins = list(params, &["bins"]).into_iter().collect();
    q.page = parse_num(params, "page")?.unwrap_or(0);
    q.page_size = parse_num(params, "page_size")?.unwrap_or(DEFAULT_PAGE_SIZE);
    Ok(q)
}

fn class_params(params: Params<'_>, state: &ApiState) -> Result<(Method, usize), BadParam> {
    let method = match get(params, &["method"]) {
        Some(m) => m.parse().map_err(BadParam)?,
        None => state.default_method,
    };
    let k = parse_num(params, "k")?.unwrap_or(state.default_k);
    if !(2..=7).contains(&k) {
        return Err(BadParam(format!("`k` must be in 2..=7, got {k}")));
    }
    Ok((method, k))
}

#[derive(Serialize)]
struct SearchSummary<'a> {
    total: usize,
    scale: BinScale,
    facets: &'a geomove_core::search::Facets,
}

#[derive(Serialize)]
struct BinOut {
    bin_id: String,
    count: u64,
    class: usize,
    centroid: [f64; 2],
    geometry: Option<Vec<[f64; 2]>>,
    coarse: bool,
}

#[derive(Serialize)]
struct BinsOut {
    scale: BinScale,
    method: Method,
    k: usize,
    breaks: Option<ClassBreaks<f64>>,
    bins: Vec<BinOut>,
}

fn unfiltered(q: &Query) -> Query {
    Query { selected_bins: BTreeSet::new(), ..q.clone() }
}

fn refs(v: &[Arc<Statement>]) -> Vec<&Statement> {
    v.iter().map(|s| &**s).collect()
}

fn route(path: &str, params: Params<'_>, state: &ApiState, snap: &Snapshot, index: &SearchIndex) -> Result<Response, BadParam> {
    let q = parse_query(params, state.threshold, snap)?;
    q.validate().map_err(|e| BadParam(e.to_string()))?;
    let bad = |e: &dyn std::fmt::Display| BadParam(e.to_string());
    Ok(match path {
        "/search" => {
            let page = snap.search(&q).map_err(|e| bad(&e))?;
            Response::ok(SearchSummary { total: page.total, scale: q.scale, facets: &page.facets })
        }
        "/bins" => {
            let (method, k) = class_params(params, state)?;
            let matches = snap.matches(&unfiltered(&q)).map_err(|e| bad(&e))?;
            let bins = aggregate_counts(refs(&matches), q.scale, index.binner());
            let breaks = if bins.is_empty() {
                None
            } else {
                let counts: Vec<f64> = bins.iter().map(|b| b.count as f64).collect();
                Some(compute_breaks(&counts, method, k).map_err(|e| bad(&e))?)
            };
            let bins = bins
                .into_iter()
                .map(|b| BinOut {
                    class: breaks.as_ref().map_or(0, |cb| cb.classify(b.count as f64)),
                    bin_id: b.bin_id,
                    count: b.count,
                    centroid: b.centroid,
                    geometry: b.geometry,
                    coarse: b.coarse,
                })
                .collect();
            Response::ok(BinsOut { scale: q.scale, method, k, breaks, bins })
        }
        "/connections" => {
            if q.selected_bins.is_empty() {
                return Err(BadParam("`/connections` needs at least one selected bin in `bins`".into()));
            }
            let (method, k) = class_params(params, state)?;
            let matches = snap.matches(&q).map_err(|e| bad(&e))?;
            let c = aggregate_connections(&refs(&matches), q.scale, &q.selected_bins, index.binner(), method, k)
                .map_err(|e| bad(&e))?;
            Response::ok(json!({
                "scale": q.scale,
                "method": method,
                "k": k,
                "breaks": c.breaks,
                "connections": c.connections,
            }))
        }
        "/bigrams" => {
            let limit = parse_num(params, "limit")?.unwrap_or(DEFAULT_BIGRAM_LIMIT);
            let mut excluded = BTreeSet::new();
            for e in list(params, &["exclude"]) {
                excluded.insert(parse_bigram(&e).ok_or_else(|| BadParam(format!("bad bigram {e:?}")))?);
            }
            let matches = snap.matches(&q).map_err(|e| bad(&e))?;
            let top = top_bigrams(refs(&matches), &excluded, limit).map_err(|e| bad(&e))?;
            Response::ok(json!({ "limit": limit, "bigrams": top }))
        }
        "/timeline" => {
            let matches = snap.matches(&unfiltered(&q)).map_err(|e| bad(&e))?;
            let range = q.time_range.or_else(|| {
                let lo = matches.iter().map(|s| s.published_at).min()?;
                let hi = matches.iter().map(|s| s.published_at).max()?;
                Some((lo, hi))
            });
            let buckets = match range {
                Some((t0, t1)) => temporal_histogram(refs(&matches), t0, t1).map_err(|e| bad(&e))?,
                None => Vec::new(),
            };
            Response::ok(json!({ "buckets": buckets }))
        }
        "/statements" => {
            let page = snap.search(&q).map_err(|e| bad(&e))?;
            Response::ok(json!({
                "total": page.total,
                "page": page.page,
                "page_size": page.page_size,
                "statements": page.statements,
            }))
        }
        other => return Ok(Response::error(404, format!("unknown endpoint {other}"))),
    })
}

/// Answer one GET request.
pub fn handle(state: &ApiState, path: &str, params: &[(String, String)]) -> Response {
    const ENDPOINTS: &[&str] = &["/search", "/bins", "/connections", "/bigrams", "/timeline", "/statements"];
    let path = path.trim_end_matches('/');
    if !ENDPOINTS.contains(&path) {
        return Response::error(404, format!("unknown endpoint {path}"));
    }
    let Some(index) = state.index() else {
        return Response::error(503, "index not ready");
    };
    let snap = index.snapshot();
    match route(path, params, state, &snap, index) {
        Ok(r) => r,
        Err(BadParam(msg)) => Response::error(400, msg),
    }
}

/// Decode a raw query string into key/value pairs.
pub fn parse_query_string(raw: Option<&str>) -> Vec<(String, String)> {
    raw.map(|r| url::form_urlencoded::parse(r.as_bytes()).into_owned().collect()).unwrap_or_default()
}
