use std::fs;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use geomove_core::binning::Boundaries;
use geomove_core::breaks::compute_breaks;
use geomove_core::geoparse::{evaluate_geoparser, parse_gold};
use geomove_core::impairment::{baseline_ruleset, evaluate_ruleset, modified_ruleset, parse_labeled};
use geomove_core::movement::{LexiconScorer, MovementScorerConfig};
use geomove_core::pipeline::{IngestStats, Pipeline};
use geomove_core::{Binner, Gazetteer, Geoparser, Method, RuleSet, SearchIndex, Source};

use crate::api::{handle, ApiState};
use crate::config::{ServiceConfig, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "geomove", version, about = "Mine, index and explore movement statements")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Regenerate the index from its statement store before use.
    #[arg(long, global = true)]
    pub rebuild: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run JSON-lines records through the pipeline into the index.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Source for records without a `source` field.
        #[arg(long)]
        source: Source,
        /// Replace unparseable timestamps with the corpus start date.
        #[arg(long)]
        lenient: bool,
        #[arg(long)]
        index_dir: Option<PathBuf>,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        index_dir: Option<PathBuf>,
    },
    /// Score an impairment rule set against labeled statements.
    EvalImpairment {
        #[arg(long)]
        data: PathBuf,
        /// `baseline`, `modified`, or a rule file.
        #[arg(long, default_value = "baseline")]
        rules: String,
    },
    /// Score the geoparser against a gold corpus.
    EvalGeoparser {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
    },
    /// Print class boundaries for a list of values.
    Breaks {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
    /// Search the index and print a table of statements.
    Query {
        text: Option<String>,
        #[arg(long, value_delimiter = ',')]
        source: Vec<Source>,
        #[arg(long, value_delimiter = ',')]
        movement: Vec<String>,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        scale: Option<String>,
        #[arg(long, value_delimiter = ',')]
        bins: Vec<String>,
        #[arg(long, default_value_t = 0)]
        page: usize,
        #[arg(long, default_value_t = 20)]
        page_size: usize,
        #[arg(long)]
        index_dir: Option<PathBuf>,
    },
}

pub fn load_binner(cfg: &ServiceConfig) -> anyhow::Result<Binner> {
    let mut binner = Binner::new(cfg.hex_large, cfg.hex_small)?;
    if let Some(p) = &cfg.boundaries {
        binner = binner.with_boundaries(Boundaries::load(p)?);
    }
    Ok(binner)
}

pub fn load_rules(which: Option<&str>) -> anyhow::Result<RuleSet> {
    Ok(match which {
        None | Some("modified") => modified_ruleset(),
        Some("baseline") => baseline_ruleset(),
        Some(path) => RuleSet::load(path.as_ref())?,
    })
}

pub fn load_pipeline(cfg: &ServiceConfig, lenient: bool) -> anyhow::Result<Pipeline> {
    let gaz = Gazetteer::load(&cfg.gazetteer).with_context(|| format!("loading {}", cfg.gazetteer.display()))?;
    let rules = load_rules(cfg.rules.as_ref().and_then(|p| p.to_str()))?;
    let mut p = Pipeline::new(Arc::new(Geoparser::new(gaz)), Arc::new(rules));
    let scorer_cfg = MovementScorerConfig { threshold: cfg.threshold, lexicon_path: cfg.movement_lexicon.clone() };
    scorer_cfg.validate()?;
    p.scorer = Arc::new(LexiconScorer::from_config(&scorer_cfg)?);
    p.threshold = cfg.threshold;
    p.parse.lenient = lenient;
    Ok(p)
}

pub fn open_index(cfg: &ServiceConfig, rebuild: bool) -> anyhow::Result<SearchIndex> {
    let binner = Arc::new(load_binner(cfg)?);
    if !cfg.index_dir.join("statements.jsonl").exists() {
        bail!("no index at {}; run `geomove ingest` first", cfg.index_dir.display());
    }
    Ok(SearchIndex::open(&cfg.index_dir, binner, rebuild)?)
}

fn metrics_line(name: &str, cm: &geomove_core::ConfusionMatrix) -> anyhow::Result<String> {
    let m = cm.metrics::<f64>()?.rounded(2);
    Ok(format!(
        "{name}: TP {} FP {} FN {} TN {} | P {:.2} R {:.2} F1 {:.2} Acc {:.2}",
        cm.tp, cm.fp, cm.fn_, cm.tn, m.precision, m.recall, m.f1, m.accuracy
    ))
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(n - 1).collect();
        t.push('…');
        t
    }
}

/// Execute one command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg = ServiceConfig::discover(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { files, source, lenient, index_dir, gazetteer } => {
            if let Some(d) = index_dir {
                cfg.index_dir = d;
            }
            if let Some(g) = gazetteer {
                cfg.gazetteer = g;
            }
            cfg.validate_paths()?;
            let pipeline = load_pipeline(&cfg, lenient)?;
            let index = if cfg.index_dir.join("statements.jsonl").exists() {
                open_index(&cfg, cli.rebuild)?
            } else {
                SearchIndex::new(Arc::new(load_binner(&cfg)?))
            };
            let mut total = IngestStats::default();
            {
                let mut w = index.writer();
                for f in &files {
                    let file = fs::File::open(f).with_context(|| format!("opening {}", f.display()))?;
                    let mut stats = IngestStats::default();
                    pipeline.ingest(BufReader::new(file), source, &mut w, &mut stats)?;
                    writeln!(out, "== {}", f.display())?;
                    writeln!(out, "{stats}")?;
                    for d in &stats.diagnostics {
                        writeln!(out, "  ! {d}")?;
                    }
                    total.merge(&stats);
                }
            }
            index.save(&cfg.index_dir)?;
            if files.len() > 1 {
                writeln!(out, "== total")?;
                writeln!(out, "{total}")?;
            }
            writeln!(out, "index: {} statements in {}", index.snapshot().len(), cfg.index_dir.display())?;
        }
        Command::Serve { listen, index_dir } => {
            if let Some(l) = listen {
                cfg.listen = l;
            }
            if let Some(d) = index_dir {
                cfg.index_dir = d;
            }
            cfg.validate()?;
            let addr = cfg.listen.parse()?;
            let state = Arc::new(ApiState::new(cfg.threshold, cfg.default_method, cfg.default_k));
            let rebuild = cli.rebuild;
            let cors = cfg.cors_allowlist.clone();
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::server::serve(addr, state, &cors, move || Ok(Arc::new(open_index(&cfg, rebuild)?))))?;
        }
        Command::EvalImpairment { data, rules } => {
            let src = fs::read_to_string(&data).with_context(|| format!("reading {}", data.display()))?;
            let labeled = parse_labeled(&src)?;
            let rs = load_rules(Some(&rules))?;
            let cm = evaluate_ruleset(&rs, &labeled);
            writeln!(out, "{}", metrics_line(&rs.name, &cm)?)?;
        }
        Command::EvalGeoparser { gold, gazetteer } => {
            let gaz_path = gazetteer.unwrap_or(cfg.gazetteer);
            let gaz = Gazetteer::load(&gaz_path).with_context(|| format!("loading {}", gaz_path.display()))?;
            let docs = parse_gold(&fs::read_to_string(&gold).with_context(|| format!("reading {}", gold.display()))?)?;
            let s = evaluate_geoparser(&docs, &Geoparser::new(gaz))?;
            writeln!(
                out,
                "recognition: TP {} FP {} FN {} | P {:.2} R {:.2} F1 {:.2}\nresolution accuracy: {:.2} ({}/{})",
                s.tp, s.fp, s.fn_, s.precision, s.recall, s.f1, s.resolution_accuracy, s.resolved_correct, s.tp
            )?;
        }
        Command::Breaks { method, k, values } => {
            let cb = compute_breaks(&values, method, k)?;
            let bounds: Vec<String> = cb.bounds.iter().map(|b| b.to_string()).collect();
            writeln!(out, "{}", bounds.join(","))?;
        }
        Command::Query { text, source, movement, from, to, scale, bins, page, page_size, index_dir } => {
            if let Some(d) = index_dir {
                cfg.index_dir = d;
            }
            let index = open_index(&cfg, cli.rebuild)?;
            let state = ApiState::new(cfg.threshold, cfg.default_method, cfg.default_k).with_index(Arc::new(index));
            let mut params: Vec<(String, String)> = Vec::new();
            let mut push = |k: &str, v: String| params.push((k.to_string(), v));
            if let Some(t) = text {
                push("q", t);
            }
            for s in source {
                push("sources", s.to_string());
            }
            for m in movement {
                push("movement", m);
            }
            if let Some(f) = from {
                push("from", f);
            }
            if let Some(t) = to {
                push("to", t);
            }
            if let Some(s) = scale {
                push("scale", s);
            }
            for b in bins {
                push("bins", b);
            }
            push("page", page.to_string());
            push("page_size", page_size.to_string());
            let r = handle(&state, "/statements", &params);
            if r.status != 200 {
                bail!("{}", r.body["error"]["message"].as_str().unwrap_or("query failed"));
            }
            let total = r.body["total"].as_u64().unwrap_or(0);
            writeln!(out, "{:<12} {:<10} {:<10} {:<8} {:>5}  text", "id", "date", "source", "class", "score")?;
            for s in r.body["statements"].as_array().into_iter().flatten() {
                writeln!(
                    out,
                    "{:<12} {:<10} {:<10} {:<8} {:>5.2}  {}",
                    s["stmt_id"].as_str().unwrap_or(""),
                    s["published_at"].as_str().unwrap_or("").get(..10).unwrap_or(""),
                    s["source"].as_str().unwrap_or(""),
                    s["label"].as_str().unwrap_or(""),
                    s["movement_score"].as_f64().unwrap_or(0.0),
                    truncate(s["text"].as_str().unwrap_or(""), 70)
                )?;
            }
            writeln!(out, "{total} matching statements (page {page})")?;
        }
    }
    Ok(())
}
