//! Ingestion: parse, clean, segment, score, filter, geoparse, label, index.

use std::fmt;
use std::io::BufRead;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    clean_text, parse_record, segment_statements, CorpusWindow, Document, MovementClass, ParseOptions, Source,
    Statement,
};
use crate::geoparse::Geoparser;
use crate::impairment::RuleSet;
use crate::movement::{LexiconScorer, MovementScorer, DEFAULT_THRESHOLD};
use crate::search::{IndexError, IndexWriter};

/// Keep at most this many per-record diagnostics.
pub const MAX_DIAGNOSTICS: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: u64,
    pub malformed: u64,
    pub out_of_window: u64,
    pub empty_after_cleaning: u64,
    pub documents: u64,
    pub statements: u64,
    pub movement: u64,
    pub with_places: u64,
    pub normal: u64,
    pub impaired: u64,
    pub duplicates: u64,
    pub indexed: u64,
    #[serde(skip)]
    pub diagnostics: Vec<String>,
}

impl IngestStats {
    /// Share of movement statements labeled impaired, in percent.
    pub fn impaired_pct(&self) -> f64 {
        if self.movement == 0 {
            0.0
        } else {
            100.0 * self.impaired as f64 / self.movement as f64
        }
    }

    fn note(&mut self, msg: String) {
        if self.diagnostics.len() < MAX_DIAGNOSTICS {
            self.diagnostics.push(msg);
        }
    }

    pub fn merge(&mut self, other: &IngestStats) {
        self.records += other.records;
        self.malformed += other.malformed;
        self.out_of_window += other.out_of_window;
        self.empty_after_cleaning += other.empty_after_cleaning;
        self.documents += other.documents;
        self.statements += other.statements;
        self.movement += other.movement;
        self.with_places += other.with_places;
        self.normal += other.normal;
        self.impaired += other.impaired;
        self.duplicates += other.duplicates;
        self.indexed += other.indexed;
        for d in &other.diagnostics {
            self.note(d.clone());
        }
    }
}

impl fmt::Display for IngestStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records          {}", self.records)?;
        writeln!(f, "  malformed      {}", self.malformed)?;
        writeln!(f, "  out of window  {}", self.out_of_window)?;
        writeln!(f, "  empty          {}", self.empty_after_cleaning)?;
        writeln!(f, "documents        {}", self.documents)?;
        writeln!(f, "statements       {}", self.statements)?;
        writeln!(f, "movement         {}", self.movement)?;
        writeln!(f, "  with places    {}", self.with_places)?;
        writeln!(f, "  normal         {}", self.normal)?;
        writeln!(f, "  impaired       {} ({:.1}%)", self.impaired, self.impaired_pct())?;
        writeln!(f, "duplicates       {}", self.duplicates)?;
        write!(f, "indexed          {}", self.indexed)
    }
}

#[derive(Clone)]
pub struct Pipeline {
    pub parse: ParseOptions,
    pub window: CorpusWindow,
    pub scorer: Arc<dyn MovementScorer>,
    pub threshold: f64,
    pub geoparser: Arc<Geoparser>,
    pub rules: Arc<RuleSet>,
}

impl Pipeline {
    pub fn new(geoparser: Arc<Geoparser>, rules: Arc<RuleSet>) -> Pipeline {
        Pipeline {
            parse: ParseOptions::default(),
            window: CorpusWindow::default(),
            scorer: Arc::new(LexiconScorer::bundled()),
            threshold: DEFAULT_THRESHOLD,
            geoparser,
            rules,
        }
    }

    /// Movement statements of one document, geoparsed and labeled. Updates
    /// the statement-level counters of `stats`.
    pub fn process_document(&self, mut doc: Document, stats: &mut IngestStats) -> Vec<Statement> {
        doc.body = clean_text(&doc.body);
        if doc.body.is_empty() {
            stats.empty_after_cleaning += 1;
            return Vec::new();
        }
        stats.documents += 1;
        let mut out = Vec::new();
        for mut s in segment_statements(&doc) {
            stats.statements += 1;
            s.movement_score = self.scorer.score(&s.text).unwrap_or(0.0);
            if s.movement_score <= self.threshold {
                continue;
            }
            stats.movement += 1;
            s.places = self.geoparser.parse(&s.text, s.source);
            if !s.places.is_empty() {
                stats.with_places += 1;
            }
            let label = self.rules.classify_text(&s.text).label;
            match label {
                MovementClass::Normal => stats.normal += 1,
                MovementClass::Impaired => stats.impaired += 1,
            }
            s.label = Some(label);
            out.push(s);
        }
        out
    }

    /// Parse one raw record into a document inside the corpus window.
    pub fn read_record(&self, line: &[u8], source: Source, stats: &mut IngestStats) -> Option<Document> {
        stats.records += 1;
        match parse_record(line, source, &self.parse) {
            Ok(doc) if self.window.contains(&doc.published_at) => Some(doc),
            Ok(doc) => {
                stats.out_of_window += 1;
                stats.note(format!("record {}: {} outside corpus window", stats.records, doc.published_at.date_naive()));
                None
            }
            Err(e) => {
                stats.malformed += 1;
                stats.note(format!("record {}: {e}", stats.records));
                None
            }
        }
    }

    /// Run every line of `reader` through the pipeline into `writer`.
    /// Bad records and duplicate statement ids are counted and skipped.
    pub fn ingest<R: BufRead>(
        &self,
        reader: R,
        source: Source,
        writer: &mut IndexWriter<'_>,
        stats: &mut IngestStats,
    ) -> std::io::Result<()> {
        for line in reader.split(b'\n') {
            let line = line?;
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let Some(doc) = self.read_record(&line, source, stats) else { continue };
            for s in self.process_document(doc, stats) {
                match writer.add(s) {
                    Ok(()) => stats.indexed += 1,
                    Err(IndexError::DuplicateId(id)) => {
                        stats.duplicates += 1;
                        stats.note(format!("duplicate statement id {id:?}"));
                    }
                    Err(e) => stats.note(e.to_string()),
                }
            }
        }
        Ok(())
    }
}
