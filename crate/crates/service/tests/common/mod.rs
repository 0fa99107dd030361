#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use geomove_core::pipeline::IngestStats;
use geomove_core::{SearchIndex, Source};
use geomove_service::cli::{load_binner, load_pipeline};
use geomove_service::{ApiState, ServiceConfig};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_config(index_dir: &Path) -> ServiceConfig {
    ServiceConfig {
        gazetteer: fixture("gazetteer.tsv"),
        boundaries: Some(fixture("boundaries.geojson")),
        index_dir: index_dir.to_path_buf(),
        ..ServiceConfig::default()
    }
}

pub fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("geomove.toml");
    let body = format!(
        "gazetteer = {:?}\nboundaries = {:?}\nindex_dir = \"index\"\n",
        fixture("gazetteer.tsv"),
        fixture("boundaries.geojson")
    );
    fs::write(&p, body).unwrap();
    p
}

/// The three fixture feeds run through the default pipeline.
pub fn fixture_index() -> SearchIndex {
    let cfg = fixture_config(Path::new("unused"));
    let pipeline = load_pipeline(&cfg, false).unwrap();
    let index = SearchIndex::new(Arc::new(load_binner(&cfg).unwrap()));
    {
        let mut w = index.writer();
        for source in Source::ALL {
            let f = fs::File::open(fixture(&format!("ingest/{source}.jsonl"))).unwrap();
            pipeline.ingest(std::io::BufReader::new(f), source, &mut w, &mut IngestStats::default()).unwrap();
        }
    }
    index
}

pub fn fixture_state() -> ApiState {
    ApiState::new(0.6, geomove_core::Method::Jenks, 5).with_index(Arc::new(fixture_index()))
}

pub fn params(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

pub fn expected() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture("ingest/expected.json")).unwrap()).unwrap()
}
