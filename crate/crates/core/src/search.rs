//! Embedded inverted index with stemmed full-text matching, columnar
//! filters and faceted aggregation over immutable snapshots.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, MutexGuard, RwLock};
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{temporal_histogram, TemporalBucket};
use crate::binning::{BinScale, Binner};
use crate::corpus::{MovementClass, Source, Statement};
use crate::text::{is_stopword, words};

pub const INDEX_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_COMMIT_EVERY: usize = 10_000;
pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 100;

const MANIFEST: &str = "manifest.json";
const STATEMENTS: &str = "statements.jsonl";
const POSTINGS: &str = "postings.json";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate statement id {0:?}")]
    DuplicateId(String),
    #[error("statement {0:?} has no movement label")]
    Unlabeled(String),
    #[error("bad query: {0}")]
    BadQuery(String),
    #[error("index at {path} needs a rebuild: {reason}")]
    NeedsRebuild { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IndexError + '_ {
    move |source| IndexError::Io { path: path.to_path_buf(), source }
}

/// English Snowball stem of a lowercase token.
pub fn stem(token: &str) -> String {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English)).stem(token).into_owned()
}

/// Distinct stems of the non-stopword tokens of a query string.
pub fn query_stems(text: &str) -> BTreeSet<String> {
    words(text).into_iter().filter(|w| !is_stopword(w)).map(|w| stem(&w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Query {
    pub text: Option<String>,
    /// Empty means all sources.
    pub sources: BTreeSet<Source>,
    /// Empty means both classes.
    pub movement_class: BTreeSet<MovementClass>,
    /// Inclusive publication-time range.
    pub time_range: Option<(DateTime<Utc>, DateTime<Utc>)>,
    /// Scale of the bin facet and of `selected_bins`.
    pub scale: BinScale,
    pub selected_bins: BTreeSet<String>,
    /// Keep only statements scoring strictly above this.
    pub min_score: Option<f64>,
    pub page: usize,
    pub page_size: usize,
}

impl Default for Query {
    fn default() -> Self {
        Query {
            text: None,
            sources: BTreeSet::new(),
            movement_class: BTreeSet::new(),
            time_range: None,
            scale: BinScale::Admin1,
            selected_bins: BTreeSet::new(),
            min_score: None,
            page: 0,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl Query {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return Err(IndexError::BadQuery(format!("page_size {} outside 1..={MAX_PAGE_SIZE}", self.page_size)));
        }
        if let Some((t0, t1)) = self.time_range {
            if t0 > t1 {
                return Err(IndexError::BadQuery("time range start is after its end".into()));
            }
        }
        if let Some(m) = self.min_score {
            if !(0.0..=1.0).contains(&m) {
                return Err(IndexError::BadQuery(format!("min_score {m} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementSummary {
    pub stmt_id: String,
    pub doc_id: String,
    pub source: Source,
    pub published_at: DateTime<Utc>,
    pub text: String,
    pub label: MovementClass,
    pub movement_score: f64,
    pub places: Vec<String>,
    pub url: Option<String>,
    pub relevance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinFacet {
    pub bin_id: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facets {
    pub scale: BinScale,
    /// Counts over the match set without the bin selection applied.
    pub bins: Vec<BinFacet>,
    pub timeline: Vec<TemporalBucket>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultPage {
    pub total: usize,
    pub page: usize,
    pub page_size: usize,
    pub statements: Vec<StatementSummary>,
    pub facets: Facets,
}

fn scale_slot(scale: BinScale) -> usize {
    BinScale::ALL.iter().position(|s| *s == scale).expect("listed")
}

#[derive(Debug, Clone, Default)]
struct BinColumn {
    names: Vec<String>,
    lookup: HashMap<String, u32>,
    /// Distinct bins per document.
    per_doc: Vec<Box<[u32]>>,
}

impl BinColumn {
    fn push(&mut self, bins: BTreeSet<String>) {
        let ids: Vec<u32> = bins
            .into_iter()
            .map(|b| {
                if let Some(&i) = self.lookup.get(&b) {
                    return i;
                }
                let i = self.names.len() as u32;
                self.names.push(b.clone());
                self.lookup.insert(b, i);
                i
            })
            .collect();
        self.per_doc.push(ids.into_boxed_slice());
    }
}

/// An immutable, consistent view of the index.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    stmts: Vec<Arc<Statement>>,
    ids: HashMap<String, u32>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    source: Vec<Source>,
    label: Vec<MovementClass>,
    time: Vec<DateTime<Utc>>,
    bins: [BinColumn; 5],
    time_bounds: Option<(DateTime<Utc>, DateTime<Utc>)>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.stmts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stmts.is_empty()
    }

    pub fn get(&self, stmt_id: &str) -> Option<&Arc<Statement>> {
        self.ids.get(stmt_id).map(|&i| &self.stmts[i as usize])
    }

    pub fn statements(&self) -> &[Arc<Statement>] {
        &self.stmts
    }

    /// Earliest and latest publication time in the snapshot.
    pub fn time_bounds(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        self.time_bounds
    }

    pub fn contains(&self, stmt_id: &str) -> bool {
        self.ids.contains_key(stmt_id)
    }

    fn push(&mut self, stmt: Statement, binner: &Binner, postings: bool) {
        let doc = self.stmts.len() as u32;
        if postings {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for w in stmt.tokens.iter().filter(|w| !is_stopword(w)) {
                *tf.entry(stem(w)).or_default() += 1;
            }
            for (term, n) in tf {
                self.postings.entry(term).or_default().push((doc, n));
            }
        }
        for scale in BinScale::ALL {
            self.bins[scale_slot(scale)].push(binner.statement_bins(&stmt, scale));
        }
        self.ids.insert(stmt.stmt_id.clone(), doc);
        self.source.push(stmt.source);
        self.label.push(stmt.label.expect("checked by writer"));
        let t = stmt.published_at;
        self.time_bounds = Some(self.time_bounds.map_or((t, t), |(lo, hi)| (lo.min(t), hi.max(t))));
        self.time.push(t);
        self.stmts.push(Arc::new(stmt));
    }

    /// Relevance per document for the text part of a query; `None` means
    /// no text constraint.
    fn text_scores(&self, q: &Query) -> Option<HashMap<u32, f64>> {
        let stems = query_stems(q.text.as_deref().unwrap_or(""));
        if stems.is_empty() {
            return None;
        }
        let n = self.stmts.len() as f64;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for s in &stems {
            let Some(list) = self.postings.get(s) else { continue };
            let idf = (1.0 + n / list.len() as f64).ln();
            for &(doc, tf) in list {
                *scores.entry(doc).or_default() += tf as f64 * idf;
            }
        }
        Some(scores)
    }

    fn passes_columns(&self, doc: u32, q: &Query) -> bool {
        let i = doc as usize;
        (q.sources.is_empty() || q.sources.contains(&self.source[i]))
            && (q.movement_class.is_empty() || q.movement_class.contains(&self.label[i]))
            && q.time_range.is_none_or(|(t0, t1)| self.time[i] >= t0 && self.time[i] <= t1)
            && q.min_score.is_none_or(|m| self.stmts[i].movement_score > m)
    }

    /// Documents matching everything except the bin selection, with their
    /// relevance.
    fn prefiltered(&self, q: &Query) -> Vec<(u32, f64)> {
        match self.text_scores(q) {
            Some(scores) => scores.into_iter().filter(|(d, _)| self.passes_columns(*d, q)).collect(),
            None => (0..self.stmts.len() as u32).filter(|&d| self.passes_columns(d, q)).map(|d| (d, 0.0)).collect(),
        }
    }

    fn selected_ids(&self, q: &Query) -> Option<HashSet<u32>> {
        if q.selected_bins.is_empty() {
            return None;
        }
        let col = &self.bins[scale_slot(q.scale)];
        Some(q.selected_bins.iter().filter_map(|b| col.lookup.get(b).copied()).collect())
    }

    fn in_selection(&self, doc: u32, scale: BinScale, sel: &HashSet<u32>) -> bool {
        self.bins[scale_slot(scale)].per_doc[doc as usize].iter().any(|b| sel.contains(b))
    }

    fn order(&self, hits: &mut [(u32, f64)], upto: usize) {
        let cmp = |a: &(u32, f64), b: &(u32, f64)| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.time[b.0 as usize].cmp(&self.time[a.0 as usize]))
                .then_with(|| self.stmts[a.0 as usize].stmt_id.cmp(&self.stmts[b.0 as usize].stmt_id))
        };
        if upto < hits.len() && upto > 0 {
            hits.select_nth_unstable_by(upto - 1, cmp);
            hits[..upto].sort_unstable_by(cmp);
        } else {
            hits.sort_unstable_by(cmp);
        }
    }

    /// The full ordered match set, bin selection included.
    pub fn matches(&self, q: &Query) -> Result<Vec<Arc<Statement>>, IndexError> {
        q.validate()?;
        let mut hits = self.prefiltered(q);
        if let Some(sel) = self.selected_ids(q) {
            hits.retain(|(d, _)| self.in_selection(*d, q.scale, &sel));
        }
        let n = hits.len();
        self.order(&mut hits, n);
        Ok(hits.into_iter().map(|(d, _)| self.stmts[d as usize].clone()).collect())
    }

    pub fn search(&self, q: &Query) -> Result<ResultPage, IndexError> {
        q.validate()?;
        let pre = self.prefiltered(q);
        let slot = scale_slot(q.scale);
        let col = &self.bins[slot];

        let mut bin_counts = vec![0u64; col.names.len()];
        for &(d, _) in &pre {
            for &b in col.per_doc[d as usize].iter() {
                bin_counts[b as usize] += 1;
            }
        }
        let mut bins: Vec<BinFacet> = bin_counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, &count)| BinFacet { bin_id: col.names[i].clone(), count })
            .collect();
        bins.sort_by(|a, b| a.bin_id.cmp(&b.bin_id));

        let range = q.time_range.or_else(|| {
            let lo = pre.iter().map(|(d, _)| self.time[*d as usize]).min()?;
            let hi = pre.iter().map(|(d, _)| self.time[*d as usize]).max()?;
            Some((lo, hi))
        });
        let timeline = match range {
            Some((t0, t1)) => temporal_histogram(pre.iter().map(|(d, _)| &*self.stmts[*d as usize]), t0, t1)
                .map_err(|e| IndexError::BadQuery(e.to_string()))?,
            None => Vec::new(),
        };

        let mut hits = pre;
        if let Some(sel) = self.selected_ids(q) {
            hits.retain(|(d, _)| self.in_selection(*d, q.scale, &sel));
        }
        let total = hits.len();
        let start = q.page.saturating_mul(q.page_size).min(total);
        let end = (start + q.page_size).min(total);
        self.order(&mut hits, end);
        let statements = hits[start..end]
            .iter()
            .map(|&(d, relevance)| {
                let s = &self.stmts[d as usize];
                StatementSummary {
                    stmt_id: s.stmt_id.clone(),
                    doc_id: s.doc_id.clone(),
                    source: s.source,
                    published_at: s.published_at,
                    text: s.text.clone(),
                    label: self.label[d as usize],
                    movement_score: s.movement_score,
                    places: s.places.iter().map(|m| m.place.name.clone()).collect(),
                    url: s.url.clone(),
                    relevance,
                }
            })
            .collect();
        Ok(ResultPage {
            total,
            page: q.page,
            page_size: q.page_size,
            statements,
            facets: Facets { scale: q.scale, bins, timeline },
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    statements: usize,
    terms: usize,
    hex_large: f64,
    hex_small: f64,
}

/// Shared index: many readers, one writer, atomic snapshot swaps.
#[derive(Debug)]
pub struct SearchIndex {
    binner: Arc<Binner>,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
    commit_every: usize,
}

impl SearchIndex {
    pub fn new(binner: Arc<Binner>) -> SearchIndex {
        SearchIndex {
            binner,
            current: RwLock::new(Arc::new(Snapshot::default())),
            writer: Mutex::new(()),
            commit_every: DEFAULT_COMMIT_EVERY,
        }
    }

    pub fn with_commit_every(mut self, n: usize) -> SearchIndex {
        self.commit_every = n.max(1);
        self
    }

    pub fn binner(&self) -> &Arc<Binner> {
        &self.binner
    }

    /// The latest committed snapshot.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().clone()
    }

    /// Blocks while another writer is open.
    pub fn writer(&self) -> IndexWriter<'_> {
        IndexWriter { index: self, _guard: self.writer.lock(), pending: Vec::new(), pending_ids: HashSet::new() }
    }

    /// Index and commit a batch of statements.
    pub fn index_all(&self, stmts: impl IntoIterator<Item = Statement>) -> Result<usize, IndexError> {
        let mut w = self.writer();
        let mut n = 0;
        for s in stmts {
            w.add(s)?;
            n += 1;
        }
        w.commit();
        Ok(n)
    }

    fn hex_sizes(&self) -> (f64, f64) {
        let size = |s| self.binner.hex_grid(s).map(|g| g.cell_size()).expect("hex scale");
        (size(BinScale::HexLarge), size(BinScale::HexSmall))
    }

    /// Write the committed snapshot to `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let snap = self.snapshot();
        let write_json = |name: &str, f: &dyn Fn(&mut BufWriter<fs::File>) -> Result<(), IndexError>| {
            let tmp = dir.join(format!("{name}.tmp"));
            let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(io_err(&tmp))?;
            fs::rename(&tmp, dir.join(name)).map_err(io_err(&tmp))
        };
        let fmt = |p: &Path| {
            let p = p.to_path_buf();
            move |source| IndexError::Format { path: p, source }
        };
        let stmt_path = dir.join(STATEMENTS);
        write_json(STATEMENTS, &|w| {
            for s in &snap.stmts {
                serde_json::to_writer(&mut *w, &**s).map_err(fmt(&stmt_path))?;
                w.write_all(b"\n").map_err(io_err(&stmt_path))?;
            }
            Ok(())
        })?;
        let post_path = dir.join(POSTINGS);
        write_json(POSTINGS, &|w| serde_json::to_writer(w, &snap.postings).map_err(fmt(&post_path)))?;
        let (hex_large, hex_small) = self.hex_sizes();
        let manifest = Manifest {
            format_version: INDEX_FORMAT_VERSION,
            statements: snap.len(),
            terms: snap.postings.len(),
            hex_large,
            hex_small,
        };
        let man_path = dir.join(MANIFEST);
        write_json(MANIFEST, &|w| serde_json::to_writer_pretty(w, &manifest).map_err(fmt(&man_path)))
    }

    fn read_statements(dir: &Path) -> Result<Vec<Statement>, IndexError> {
        let path = dir.join(STATEMENTS);
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|source| IndexError::Format { path: path.clone(), source })?);
        }
        Ok(out)
    }

    /// Load an index written by [`SearchIndex::save`]. With `rebuild`, the
    /// postings are regenerated from the statement store and written back.
    pub fn open(dir: &Path, binner: Arc<Binner>, rebuild: bool) -> Result<SearchIndex, IndexError> {
        let index = SearchIndex::new(binner);
        let stmts = Self::read_statements(dir)?;
        if rebuild {
            index.index_all(stmts)?;
            index.save(dir)?;
            return Ok(index);
        }
        let needs = |reason: String| IndexError::NeedsRebuild { path: dir.to_path_buf(), reason };
        let man_path = dir.join(MANIFEST);
        let manifest: Manifest = fs::read_to_string(&man_path)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str(&s).map_err(|e| e.to_string()))
            .map_err(|e| needs(format!("manifest: {e}")))?;
        if manifest.format_version != INDEX_FORMAT_VERSION {
            return Err(needs(format!("format version {} (expected {INDEX_FORMAT_VERSION})", manifest.format_version)));
        }
        if manifest.statements != stmts.len() {
            return Err(needs(format!("manifest lists {} statements, store has {}", manifest.statements, stmts.len())));
        }
        if (manifest.hex_large, manifest.hex_small) != index.hex_sizes() {
            return Err(needs("hexagon sizes changed".into()));
        }
        let postings: HashMap<String, Vec<(u32, u32)>> = fs::read_to_string(dir.join(POSTINGS))
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str(&s).map_err(|e| e.to_string()))
            .map_err(|e| needs(format!("postings: {e}")))?;
        if postings.len() != manifest.terms {
            return Err(needs("postings do not match manifest".into()));
        }
        let mut snap = Snapshot::default();
        for s in stmts {
            if s.label.is_none() {
                return Err(IndexError::Unlabeled(s.stmt_id));
            }
            if snap.contains(&s.stmt_id) {
                return Err(IndexError::DuplicateId(s.stmt_id));
            }
            snap.push(s, &index.binner, false);
        }
        snap.postings = postings;
        *index.current.write() = Arc::new(snap);
        Ok(index)
    }
}

/// Buffers statements and publishes them in batches.
pub struct IndexWriter<'a> {
    index: &'a SearchIndex,
    _guard: MutexGuard<'a, ()>,
    pending: Vec<Statement>,
    pending_ids: HashSet<String>,
}

impl IndexWriter<'_> {
    /// Queue a labeled statement. Commits automatically once the batch
    /// reaches the index's commit size.
    pub fn add(&mut self, stmt: Statement) -> Result<(), IndexError> {
        if stmt.label.is_none() {
            return Err(IndexError::Unlabeled(stmt.stmt_id));
        }
        if self.pending_ids.contains(&stmt.stmt_id) || self.index.current.read().contains(&stmt.stmt_id) {
            return Err(IndexError::DuplicateId(stmt.stmt_id));
        }
        self.pending_ids.insert(stmt.stmt_id.clone());
        self.pending.push(stmt);
        if self.pending.len() >= self.index.commit_every {
            self.commit();
        }
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Publish queued statements as a new snapshot.
    pub fn commit(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let mut next = (*self.index.snapshot()).clone();
        for s in self.pending.drain(..) {
            next.push(s, &self.index.binner, true);
        }
        self.pending_ids.clear();
        *self.index.current.write() = Arc::new(next);
    }
}

impl Drop for IndexWriter<'_> {
    fn drop(&mut self) {
        self.commit();
    }
}
