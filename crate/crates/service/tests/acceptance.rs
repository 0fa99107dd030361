//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use common::{expected, fixture, fixture_state, params};
use geomove_core::analytics::{place_pairs, temporal_histogram, YearMonth};
use geomove_core::binning::{HexCell, HexGrid};
use geomove_core::breaks::{compute_breaks, jenks_partition, partition_cost, Method};
use geomove_core::geoparse::{evaluate_geoparser, parse_gold};
use geomove_core::impairment::{baseline_ruleset, evaluate_ruleset, modified_ruleset, parse_labeled, MatchKind, RuleSignature};
use geomove_core::pipeline::{IngestStats, Pipeline};
use geomove_core::search::{query_stems, stem};
use geomove_core::synth::{place_ref, SynthCorpus, PLACES};
use geomove_core::tagging::Pos;
use geomove_core::{
    BinScale, Binner, ConfusionMatrix, Document, Gazetteer, Geoparser, HexGrid64, MovementClass, PlaceMention, Query,
    SearchIndex, Source, Statement,
};
use geomove_service::{handle, ApiState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const THRESHOLD: f64 = 0.6;
const EPS: f64 = 1e-9;
const LATENCY_P95: Duration = Duration::from_millis(100);
const LATENCY_CORPUS: usize = 100_000;
const GEO_MIN_F1: f64 = 0.90;
const GEO_MIN_ACCURACY: f64 = 0.90;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn doc(id: &str, when: chrono::DateTime<Utc>) -> Document {
    Document { doc_id: id.into(), source: Source::News, published_at: when, title: None, body: String::new(), url: None }
}

fn c1_metrics() -> Outcome {
    let m = ConfusionMatrix::new(23, 27, 8, 42).metrics::<f64>().map_err(|e| e.to_string())?.rounded(2);
    let got = (m.precision, m.recall, m.f1, m.accuracy);
    ensure!(got == (0.46, 0.74, 0.57, 0.65), "got {got:?}");
    Ok(format!("P {} R {} F1 {} Acc {}", got.0, got.1, got.2, got.3))
}

fn c2_rule_delta() -> Outcome {
    let sig = |pos: Option<Pos>, kind, p: &str| -> RuleSignature { (pos, kind, p.to_string()) };
    let base = baseline_ruleset().signatures();
    let modi = modified_ruleset().signatures();
    let removed: BTreeSet<_> = base.difference(&modi).cloned().collect();
    let added: BTreeSet<_> = modi.difference(&base).cloned().collect();
    let want_removed: BTreeSet<_> = [
        sig(Some(Pos::Verb), MatchKind::Prefix, "de"),
        sig(Some(Pos::Verb), MatchKind::Prefix, "mis"),
        sig(Some(Pos::Verb), MatchKind::Prefix, "dis"),
        sig(Some(Pos::Adjective), MatchKind::Prefix, "a"),
        sig(Some(Pos::Adjective), MatchKind::Prefix, "dis"),
    ]
    .into();
    let want_added: BTreeSet<_> =
        ["cancel", "postpone", "prevent", "avoid"].iter().map(|l| sig(None, MatchKind::Lemma, l)).collect();
    ensure!(removed == want_removed, "removed {removed:?}");
    ensure!(added == want_added, "added {added:?}");
    Ok(format!("-{} +{} rules", removed.len(), added.len()))
}

fn c3_rule_improvement() -> Outcome {
    let src = fs::read_to_string(fixture("impairment_labeled.jsonl")).map_err(|e| e.to_string())?;
    let data = parse_labeled(&src).map_err(|e| e.to_string())?;
    ensure!(data.len() == 100, "fixture has {} statements", data.len());
    let f1 = |cm: ConfusionMatrix| cm.metrics::<f64>().map(|m| m.f1).map_err(|e| e.to_string());
    let b = f1(evaluate_ruleset(&baseline_ruleset(), &data))?;
    let m = f1(evaluate_ruleset(&modified_ruleset(), &data))?;
    ensure!(m > b, "F1 modified {m:.3} <= baseline {b:.3}");
    Ok(format!("F1 {b:.2} -> {m:.2}"))
}

fn c4_pairs() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let when = Utc.with_ymd_and_hms(2019, 10, 1, 0, 0, 0).unwrap();
    for trial in 0..500 {
        let picks: Vec<usize> = (0..rng.gen_range(0..=8)).map(|_| rng.gen_range(0..PLACES.len())).collect();
        let mut s = Statement::new("t:0", &doc("t", when), "moved");
        s.places = picks
            .iter()
            .map(|&i| PlaceMention { start: 0, end: 0, surface: String::new(), place: place_ref(i), confidence: 1.0 })
            .collect();
        let ids: Vec<u64> = picks.iter().map(|&i| place_ref(i).place_id).collect::<BTreeSet<_>>().into_iter().collect();
        let m = ids.len();
        if m > 6 {
            continue;
        }
        let mut brute = BTreeSet::new();
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    brute.insert((ids[i].min(ids[j]), ids[i].max(ids[j])));
                }
            }
        }
        let got: BTreeSet<(u64, u64)> = place_pairs(&s).into_iter().map(|p| (p.a, p.b)).collect();
        ensure!(got.len() == m * (m.saturating_sub(1)) / 2, "trial {trial}: {} pairs for m={m}", got.len());
        ensure!(got == brute, "trial {trial}: pair sets differ");
    }
    let gaz = Gazetteer::load(&fixture("gazetteer.tsv")).map_err(|e| e.to_string())?;
    let text = "Travelling from Sydney to New York and London.";
    let mut s = Statement::new("e:0", &doc("e", when), text);
    s.places = Geoparser::new(gaz).parse(text, Source::News);
    let names: BTreeMap<u64, String> = s.places.iter().map(|p| (p.place.place_id, p.place.name.clone())).collect();
    let pairs: BTreeSet<(String, String)> = place_pairs(&s)
        .into_iter()
        .map(|p| {
            let (a, b) = (names[&p.a].clone(), names[&p.b].clone());
            if a < b { (a, b) } else { (b, a) }
        })
        .collect();
    let want: BTreeSet<(String, String)> = [("New York", "Sydney"), ("London", "Sydney"), ("London", "New York")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    ensure!(pairs == want, "example pairs {pairs:?}");
    Ok("500 random statements, example yields 3 pairs".into())
}

fn sse(class: &[f64]) -> f64 {
    let m = class.iter().sum::<f64>() / class.len() as f64;
    class.iter().map(|v| (v - m) * (v - m)).sum()
}

fn brute_force(sorted: &[f64], k: usize) -> f64 {
    if k == 1 {
        return sse(sorted);
    }
    (1..=sorted.len() - (k - 1))
        .map(|cut| sse(&sorted[..cut]) + brute_force(&sorted[cut..], k - 1))
        .fold(f64::INFINITY, f64::min)
}

fn c5_breaks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut trials = 0;
    while trials < 200 {
        let n = rng.gen_range(2..=12);
        let mut v: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0..1000.0f64) * 100.0).round() / 100.0).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let k = rng.gen_range(2..=4usize).min(v.len());
        if k < 2 {
            continue;
        }
        trials += 1;
        let best = brute_force(&v, k);
        let got = partition_cost(&v, &jenks_partition(&v, k));
        ensure!((got - best).abs() <= 1e-6 * best.max(1.0), "jenks {got} vs optimum {best} on {v:?}");

        let (lo, hi) = (v[0], v[v.len() - 1]);
        let ei = compute_breaks(&v, Method::EqualInterval, k).map_err(|e| e.to_string())?;
        let want: Vec<f64> = (1..k).map(|i| lo + i as f64 * (hi - lo) / k as f64).collect();
        ensure!(
            ei.bounds.len() == want.len() && ei.bounds.iter().zip(&want).all(|(a, b)| (a - b).abs() <= EPS * hi.max(1.0)),
            "equal interval {:?} vs {want:?}",
            ei.bounds
        );
        let qb = compute_breaks(&v, Method::Quantile, k).map_err(|e| e.to_string())?;
        let mut want: Vec<f64> = (1..k).map(|i| v[(i * v.len()).div_ceil(k) - 1]).collect();
        want.dedup();
        ensure!(qb.bounds == want, "quantile {:?} vs {want:?}", qb.bounds);

        for method in Method::ALL {
            let cb = compute_breaks(&v, method, k).map_err(|e| e.to_string())?;
            let classes: Vec<usize> = v.iter().map(|&x| cb.classify(x)).collect();
            ensure!(classes.windows(2).all(|w| w[0] <= w[1]), "{method:?} classify not monotone");
            ensure!(classes.iter().all(|&c| c < cb.k), "{method:?} class out of range");
        }
    }
    Ok(format!("{trials} trials"))
}

fn inside(ring: &[[f64; 2]], p: [f64; 2]) -> (bool, f64) {
    let mut min = f64::INFINITY;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        min = min.min((ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / ex.hypot(ey));
    }
    (min > 0.0, min)
}

fn c6_hex() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut edge = 0;
    for size in [5.0, 1.25] {
        let grid: HexGrid64 = HexGrid::new(size);
        for _ in 0..10_000 {
            let (lat, lon) = (rng.gen_range(-60.0..70.0), rng.gen_range(-170.0..170.0));
            let cell = grid.cell_at(lat, lon).map_err(|e| e.to_string())?;
            let (_, margin) = inside(&grid.polygon(cell), [lon, lat]);
            ensure!(margin > -EPS, "({lat},{lon}) outside its hex {cell} by {margin}");
            let mut containing = 0;
            for dq in -1..=1i64 {
                for dr in -1..=1i64 {
                    let other = HexCell { q: cell.q + dq, r: cell.r + dr };
                    containing += inside(&grid.polygon(other), [lon, lat]).0 as usize;
                }
            }
            if margin <= 1e-6 {
                edge += 1;
                ensure!(containing <= 1, "({lat},{lon}) in {containing} interiors");
                continue;
            }
            ensure!(containing == 1, "({lat},{lon}) in {containing} interiors");
            for (dl, dn) in [(1e-9, 0.0), (-1e-9, 0.0), (0.0, 1e-9), (0.0, -1e-9)] {
                ensure!(grid.cell_at(lat + dl, lon + dn).map_err(|e| e.to_string())? == cell, "perturbation moved ({lat},{lon})");
            }
        }
    }
    Ok(format!("20000 points, {edge} on edges"))
}

fn oracle(stmts: &[Statement], q: &Query, binner: &Binner) -> BTreeSet<String> {
    let stems = query_stems(q.text.as_deref().unwrap_or(""));
    stmts
        .iter()
        .filter(|s| {
            let own: BTreeSet<String> = s.tokens.iter().map(|t| stem(t)).collect();
            (stems.is_empty() || stems.iter().any(|x| own.contains(x)))
                && (q.sources.is_empty() || q.sources.contains(&s.source))
                && (q.movement_class.is_empty() || s.label.is_some_and(|l| q.movement_class.contains(&l)))
                && q.time_range.is_none_or(|(a, b)| s.published_at >= a && s.published_at <= b)
                && (q.selected_bins.is_empty()
                    || binner.statement_bins(s, q.scale).iter().any(|b| q.selected_bins.contains(b)))
        })
        .map(|s| s.stmt_id.clone())
        .collect()
}

fn c7_search_oracle() -> Outcome {
    const WORDS: &[&str] = &["smuggling", "gold", "moved", "flew", "cargo", "Chennai", "Mumbai", "never", "zzz", "smuggle traveled"];
    let stmts = SynthCorpus::new(7).statements(10_000);
    let binner = Arc::new(Binner::default());
    let index = SearchIndex::new(binner.clone());
    index.index_all(stmts.clone()).map_err(|e| e.to_string())?;
    let snap = index.snapshot();
    let mut pool = BTreeMap::new();
    for scale in BinScale::ALL {
        let all: BTreeSet<String> = stmts.iter().flat_map(|s| binner.statement_bins(s, scale)).collect();
        pool.insert(scale, all.into_iter().collect::<Vec<_>>());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..50 {
        let mut q = Query::default();
        if rng.gen_bool(0.7) {
            q.text = Some(WORDS.choose(&mut rng).unwrap().to_string());
        }
        if rng.gen_bool(0.5) {
            q.sources = Source::ALL.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        }
        if rng.gen_bool(0.5) {
            q.movement_class = MovementClass::ALL.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        }
        if rng.gen_bool(0.5) {
            let a = Utc.with_ymd_and_hms(2019, 8, 1, 0, 0, 0).unwrap() + chrono::Duration::days(rng.gen_range(0..470));
            q.time_range = Some((a, a + chrono::Duration::days(rng.gen_range(0..200))));
        }
        q.scale = *BinScale::ALL.choose(&mut rng).unwrap();
        if rng.gen_bool(0.6) {
            let n = rng.gen_range(1..=3);
            q.selected_bins = pool[&q.scale].choose_multiple(&mut rng, n).cloned().collect();
        }
        let want = oracle(&stmts, &q, &binner);
        let got: BTreeSet<String> = snap.matches(&q).map_err(|e| e.to_string())?.iter().map(|s| s.stmt_id.clone()).collect();
        ensure!(got == want, "query {i} ({q:?}): {} hits vs oracle {}", got.len(), want.len());
    }
    let sets: Vec<BTreeSet<String>> = ["smuggle", "smuggled", "smuggling"]
        .iter()
        .map(|w| {
            let q = Query { text: Some(w.to_string()), ..Query::default() };
            snap.matches(&q).map(|v| v.iter().map(|s| s.stmt_id.clone()).collect()).unwrap_or_default()
        })
        .collect();
    ensure!(!sets[0].is_empty() && sets[0] == sets[1] && sets[1] == sets[2], "inflection sets differ");
    Ok(format!("50 queries on 10000 statements, inflections share {} hits", sets[0].len()))
}

fn random_params(rng: &mut ChaCha8Rng, bins: &[String]) -> Vec<(String, String)> {
    const WORDS: &[&str] = &["gold", "moved", "smuggling", "cargo", "flew", "Chennai", "rain"];
    let mut p = Vec::new();
    if rng.gen_bool(0.7) {
        p.push(("q", WORDS.choose(rng).unwrap().to_string()));
    }
    if rng.gen_bool(0.3) {
        p.push(("sources", Source::ALL.choose(rng).unwrap().to_string()));
    }
    if rng.gen_bool(0.3) {
        p.push(("movement", ["normal", "impaired"].choose(rng).unwrap().to_string()));
    }
    if rng.gen_bool(0.3) {
        p.push(("from", format!("2019-{:02}-01", rng.gen_range(8..=12))));
    }
    if !bins.is_empty() && rng.gen_bool(0.5) {
        p.push(("bins", bins.choose(rng).unwrap().clone()));
    }
    p.push(("scale", "country".to_string()));
    p.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn c8_threshold() -> Outcome {
    let gaz = Gazetteer::from_reader(SynthCorpus::gazetteer_tsv().as_bytes()).map_err(|e| e.to_string())?;
    let pipeline = Pipeline::new(Arc::new(Geoparser::new(gaz)), Arc::new(modified_ruleset()));
    let mut checked = 0usize;
    for seed in 0..4u64 {
        let records = SynthCorpus::new(seed).records(600).join("\n");
        let binner = Arc::new(Binner::default());
        let clean = SearchIndex::new(binner.clone());
        let poisoned = SearchIndex::new(binner);
        let mut stats = IngestStats::default();
        pipeline
            .ingest(records.as_bytes(), Source::News, &mut clean.writer(), &mut stats)
            .map_err(|e| e.to_string())?;
        let kept: Vec<Statement> = clean.snapshot().statements().iter().map(|s| (**s).clone()).collect();
        ensure!(kept.iter().all(|s| s.movement_score > THRESHOLD), "pipeline kept a low score");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut all = kept.clone();
        for (i, s) in kept.iter().enumerate().filter(|(i, _)| i % 3 == 0) {
            let mut low = s.clone();
            low.stmt_id = format!("low{i}:0");
            low.movement_score = *[0.0, 0.25, 0.5, 0.59, THRESHOLD].choose(&mut rng).unwrap();
            all.push(low);
        }
        poisoned.index_all(all).map_err(|e| e.to_string())?;
        let a = ApiState::new(THRESHOLD, Method::Jenks, 5).with_index(Arc::new(clean));
        let b = ApiState::new(THRESHOLD, Method::Jenks, 5).with_index(Arc::new(poisoned));
        let bins: Vec<String> =
            kept.iter().flat_map(|s| s.places.iter().map(|p| p.place.country_code.clone())).collect::<BTreeSet<_>>().into_iter().collect();
        for _ in 0..40 {
            let p = random_params(&mut rng, &bins);
            for path in ["/search", "/bins", "/bigrams", "/timeline"] {
                let (ra, rb) = (handle(&a, path, &p), handle(&b, path, &p));
                ensure!(ra.status == 200, "{path} {p:?}: {}", ra.body);
                ensure!(ra.to_bytes() == rb.to_bytes(), "{path} {p:?}: low-score statements changed the response");
                checked += 1;
            }
            if p.iter().any(|(k, _)| k == "bins") {
                let (ra, rb) = (handle(&a, "/connections", &p), handle(&b, "/connections", &p));
                ensure!(ra.to_bytes() == rb.to_bytes(), "/connections {p:?}: low-score statements changed the response");
                checked += 1;
            }
            let mut ids = BTreeSet::new();
            for page in 0.. {
                let mut pp = p.clone();
                pp.push(("page".into(), page.to_string()));
                pp.push(("page_size".into(), "100".into()));
                let r = handle(&b, "/statements", &pp);
                let rows = r.body["statements"].as_array().cloned().unwrap_or_default();
                if rows.is_empty() {
                    break;
                }
                for s in &rows {
                    let score = s["movement_score"].as_f64().unwrap_or(0.0);
                    ensure!(score > THRESHOLD, "statement {} with score {score} returned", s["stmt_id"]);
                    ids.insert(s["stmt_id"].as_str().unwrap_or("").to_string());
                }
                checked += 1;
            }
            let total = handle(&a, "/statements", &p).body["total"].as_u64().unwrap_or(0);
            ensure!(ids.len() as u64 == total, "{p:?}: {} ids vs clean total {total}", ids.len());
        }
    }
    Ok(format!("{checked} responses checked"))
}

fn c9_histogram() -> Outcome {
    let stmts = SynthCorpus::new(9).statements(5_000);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = Utc.with_ymd_and_hms(2019, 7, 1, 0, 0, 0).unwrap();
    for trial in 0..100 {
        let t0 = base + chrono::Duration::days(rng.gen_range(0..450));
        let t1 = t0 + chrono::Duration::days(rng.gen_range(0..200));
        let matching: Vec<&Statement> = stmts.iter().filter(|s| s.published_at >= t0 && s.published_at <= t1).collect();
        let buckets = temporal_histogram(matching.iter().copied(), t0, t1).map_err(|e| e.to_string())?;
        let mut oracle: BTreeMap<YearMonth, (u64, u64)> = BTreeMap::new();
        for s in &matching {
            let e = oracle.entry(YearMonth::of(&s.published_at)).or_default();
            match s.label {
                Some(MovementClass::Impaired) => e.1 += 1,
                _ => e.0 += 1,
            }
        }
        for b in &buckets {
            let want = oracle.get(&b.month).copied().unwrap_or_default();
            ensure!((b.normal_count, b.impaired_count) == want, "trial {trial} {}: {:?} vs {want:?}", b.month, (b.normal_count, b.impaired_count));
        }
        let sum: u64 = buckets.iter().map(|b| b.total()).sum();
        ensure!(sum as usize == matching.len(), "trial {trial}: {sum} vs {}", matching.len());
        ensure!(buckets.windows(2).all(|w| w[1].month == w[0].month.next()), "trial {trial}: months not contiguous");
    }
    let st = fixture_state();
    for q in ["smuggling", "gold", "moved", ""] {
        let total = handle(&st, "/search", &params(&[("q", q)])).body["total"].as_u64().unwrap_or(0);
        let tl = handle(&st, "/timeline", &params(&[("q", q)]));
        let sum: u64 = tl.body["buckets"]
            .as_array()
            .into_iter()
            .flatten()
            .map(|b| b["normal_count"].as_u64().unwrap_or(0) + b["impaired_count"].as_u64().unwrap_or(0))
            .sum();
        ensure!(sum == total, "/timeline for {q:?}: {sum} vs total {total}");
    }
    Ok("100 ranges plus API timelines".into())
}

fn c10_latency() -> Outcome {
    let stmts = SynthCorpus::new(10).statements(LATENCY_CORPUS);
    let binner = Arc::new(Binner::default());
    let index = SearchIndex::new(binner.clone());
    index.index_all(stmts).map_err(|e| e.to_string())?;
    let state = ApiState::new(THRESHOLD, Method::Jenks, 5).with_index(Arc::new(index));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut times = Vec::new();
    for i in 0..220 {
        let mut p = random_params(&mut rng, &[]);
        let scale = BinScale::ALL.choose(&mut rng).unwrap().as_str().to_string();
        p.retain(|(k, _)| k != "scale");
        p.push(("scale".into(), scale));
        let t = Instant::now();
        let r = handle(&state, "/search", &p);
        let bytes = r.to_bytes();
        let dt = t.elapsed();
        ensure!(r.status == 200 && !bytes.is_empty(), "{p:?}: {}", r.body);
        if i >= 20 {
            times.push(dt);
        }
    }
    times.sort();
    let p95 = times[(times.len() * 95).div_ceil(100) - 1];
    ensure!(p95 < LATENCY_P95, "p95 {p95:?} at {LATENCY_CORPUS} statements");
    Ok(format!("p95 {:.1} ms, max {:.1} ms over {} requests", ms(p95), ms(*times.last().unwrap()), times.len()))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn c11_geoparser() -> Outcome {
    let gaz = Gazetteer::load(&fixture("gazetteer.tsv")).map_err(|e| e.to_string())?;
    let gold = parse_gold(&fs::read_to_string(fixture("geoparse_gold.jsonl")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let s = evaluate_geoparser(&gold, &Geoparser::new(gaz)).map_err(|e| e.to_string())?;
    ensure!(s.f1 >= GEO_MIN_F1, "recognition F1 {:.3}", s.f1);
    ensure!(s.resolution_accuracy >= GEO_MIN_ACCURACY, "resolution accuracy {:.3}", s.resolution_accuracy);
    Ok(format!("F1 {:.3}, accuracy {:.3} over {} documents", s.f1, s.resolution_accuracy, gold.len()))
}

fn c12_scenario() -> Outcome {
    let sc = expected()["scenario"].clone();
    let st = fixture_state();
    let q = sc["query"].as_str().unwrap_or("");
    let scale = sc["scale"].as_str().unwrap_or("");
    let sel = sc["selected"][0].as_str().unwrap_or("");
    let search = handle(&st, "/search", &params(&[("q", q), ("scale", scale)]));
    ensure!(search.body["total"] == sc["matches"], "matches {} vs {}", search.body["total"], sc["matches"]);
    let narrowed = handle(&st, "/statements", &params(&[("q", q), ("scale", scale), ("bins", sel)]));
    ensure!(narrowed.body["total"] == sc["selected_matches"], "selected matches {}", narrowed.body["total"]);

    let conns = handle(&st, "/connections", &params(&[("q", q), ("scale", scale), ("bins", sel)]));
    let list = conns.body["connections"].as_array().cloned().unwrap_or_default();
    let first = list.first().cloned().unwrap_or(Value::Null);
    let c = &sc["connection"];
    ensure!(first["a"] == c["a"] && first["b"] == c["b"] && first["weight"] == c["weight"], "top connection {first}");
    let others: Vec<Value> = list[1..].iter().map(|x| serde_json::json!({"a": x["a"], "b": x["b"], "weight": x["weight"]})).collect();
    ensure!(Value::Array(others.clone()) == sc["other_connections"], "other connections {others:?}");

    let bigrams = handle(&st, "/bigrams", &params(&[("q", q), ("scale", scale), ("bins", sel)]));
    let top = &bigrams.body["bigrams"][0];
    ensure!(top["bigram"] == serde_json::json!(["gold", "smuggling"]), "top bigram {}", top["bigram"]);
    ensure!(top["count"] == sc["top_bigram_count"], "top bigram count {}", top["count"]);

    let tl = handle(&st, "/timeline", &params(&[("q", q), ("scale", scale), ("bins", sel)]));
    ensure!(tl.body["buckets"] == sc["timeline"], "timeline {}", tl.body["buckets"]);
    let peak = tl.body["buckets"]
        .as_array()
        .and_then(|b| b.iter().max_by_key(|x| x["normal_count"].as_u64().unwrap_or(0) + x["impaired_count"].as_u64().unwrap_or(0)))
        .map(|x| x["month"].clone())
        .unwrap_or(Value::Null);
    ensure!(peak == "2019-10", "timeline peak {peak}");
    Ok(format!("{}-{} weight {}, peak {}", c["a"].as_str().unwrap_or(""), c["b"].as_str().unwrap_or(""), c["weight"], peak.as_str().unwrap_or("")))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "metric arithmetic", budget: Some(Duration::from_secs(1)), run: c1_metrics },
        Criterion { id: 2, name: "rule-set delta", budget: Some(Duration::from_secs(1)), run: c2_rule_delta },
        Criterion { id: 3, name: "rule improvement on labeled fixture", budget: Some(Duration::from_secs(1)), run: c3_rule_improvement },
        Criterion { id: 4, name: "pair combinatorics", budget: Some(Duration::from_secs(1)), run: c4_pairs },
        Criterion { id: 5, name: "class-break oracles", budget: Some(Duration::from_secs(10)), run: c5_breaks },
        Criterion { id: 6, name: "hex tessellation", budget: Some(Duration::from_secs(5)), run: c6_hex },
        Criterion { id: 7, name: "search oracle equivalence", budget: Some(Duration::from_secs(30)), run: c7_search_oracle },
        Criterion { id: 8, name: "threshold filter in API responses", budget: None, run: c8_threshold },
        Criterion { id: 9, name: "histogram conservation", budget: None, run: c9_histogram },
        Criterion { id: 10, name: "search latency p95 at 100k", budget: None, run: c10_latency },
        Criterion { id: 11, name: "geoparser gold corpus", budget: None, run: c11_geoparser },
        Criterion { id: 12, name: "end-to-end smuggling scenario", budget: None, run: c12_scenario },
    ];
    let mut failed = 0;
    for c in &criteria {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let dt = t.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if dt > b => Err(format!("took {dt:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {:<36} {detail} [{dt:.2?}]", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {:<36} {why} [{dt:.2?}]", c.id, c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
