//! Deterministic synthetic corpora for tests and benchmarks.

use chrono::{Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus::{Document, MovementClass, Source, Statement};
use crate::geoparse::{PlaceMention, PlaceRef};

/// (place_id, name, lat, lon, country, admin1)
pub const PLACES: &[(u64, &str, f64, f64, &str, &str)] = &[
    (1275339, "Mumbai", 19.07, 72.88, "IN", "MH"),
    (1264527, "Chennai", 13.08, 80.27, "IN", "TN"),
    (1273294, "Delhi", 28.65, 77.23, "IN", "DL"),
    (1185241, "Dhaka", 23.71, 90.41, "BD", "81"),
    (1174872, "Karachi", 24.86, 67.01, "PK", "05"),
    (2643743, "London", 51.51, -0.13, "GB", "ENG"),
    (2988507, "Paris", 48.85, 2.35, "FR", "11"),
    (2950159, "Berlin", 52.52, 13.41, "DE", "16"),
    (3117735, "Madrid", 40.42, -3.70, "ES", "29"),
    (3169070, "Rome", 41.89, 12.51, "IT", "07"),
    (5128581, "New York", 40.71, -74.01, "US", "NY"),
    (4684888, "Dallas", 32.78, -96.81, "US", "TX"),
    (5368361, "Los Angeles", 34.05, -118.24, "US", "CA"),
    (3530597, "Mexico City", 19.43, -99.13, "MX", "09"),
    (3448439, "Sao Paulo", -23.55, -46.64, "BR", "27"),
    (3435910, "Buenos Aires", -34.61, -58.38, "AR", "07"),
    (2147714, "Sydney", -33.87, 151.21, "AU", "02"),
    (1850147, "Tokyo", 35.69, 139.69, "JP", "40"),
    (1816670, "Beijing", 39.91, 116.40, "CN", "22"),
    (1880252, "Singapore", 1.29, 103.85, "SG", ""),
    (360630, "Cairo", 30.06, 31.25, "EG", "11"),
    (184745, "Nairobi", -1.28, 36.82, "KE", "05"),
    (2332459, "Lagos", 6.45, 3.39, "NG", "05"),
    (292223, "Dubai", 25.26, 55.30, "AE", "03"),
];

pub fn place_ref(i: usize) -> PlaceRef {
    let (place_id, name, lat, lon, cc, a1) = PLACES[i];
    PlaceRef {
        place_id,
        name: name.into(),
        lat,
        lon,
        feature_class: 'P',
        country_code: cc.into(),
        admin1_code: a1.into(),
    }
}

const SUBJECTS: &[&str] = &[
    "Refugees", "Smugglers", "Tourists", "Workers", "Migrants", "Officials", "Traders", "Pilgrims", "Students",
    "Troops", "Families", "Investors",
];
const VERBS: &[&str] = &[
    "moved", "traveled", "fled", "migrated", "walked", "sailed", "flew", "drove", "smuggled", "smuggle", "smuggling",
    "shipped", "crossed", "returned", "rushed",
];
const OBJECTS: &[&str] = &[
    "gold", "cargo", "cattle", "medicine", "grain", "cash", "timber", "fuel", "weapons", "textiles", "spices",
    "luggage",
];
const TAILS: &[&str] = &[
    "before the monsoon",
    "despite heavy rain",
    "after the border reopened",
    "during the festival season",
    "under police escort",
    "by night train",
    "on crowded ferries",
    "through mountain passes",
];
const IMPAIRED_TAILS: &[&str] = &[
    "but never arrived",
    "though flights were cancelled",
    "without permission",
    "until the route was blocked",
];

/// Reproducible generator; the same seed yields the same corpus.
pub struct SynthCorpus {
    rng: ChaCha8Rng,
}

impl SynthCorpus {
    pub fn new(seed: u64) -> Self {
        SynthCorpus { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn sentence(&mut self, places: &[PlaceRef], impaired: bool) -> String {
        let r = &mut self.rng;
        let mut s = format!(
            "{} {} {}",
            SUBJECTS.choose(r).unwrap(),
            VERBS.choose(r).unwrap(),
            OBJECTS.choose(r).unwrap()
        );
        match places {
            [] => {}
            [a] => s += &format!(" to {}", a.name),
            [a, rest @ ..] => {
                s += &format!(" from {}", a.name);
                for p in rest {
                    s += &format!(" to {}", p.name);
                }
            }
        }
        s.push(' ');
        s += if impaired { IMPAIRED_TAILS.choose(r).unwrap() } else { TAILS.choose(r).unwrap() };
        s.push('.');
        s
    }

    fn date(&mut self) -> chrono::DateTime<Utc> {
        let start = Utc.with_ymd_and_hms(2019, 8, 1, 0, 0, 0).unwrap();
        start + Duration::hours(self.rng.gen_range(0..(470 * 24)))
    }

    fn pick_places(&mut self) -> Vec<PlaceRef> {
        let m = match self.rng.gen_range(0..10) {
            0 => 0,
            1..=3 => 1,
            4..=7 => 2,
            8 => 3,
            _ => 4,
        };
        let mut idx: Vec<usize> = (0..PLACES.len()).collect();
        idx.shuffle(&mut self.rng);
        idx.truncate(m);
        idx.into_iter().map(place_ref).collect()
    }

    /// Processed statements: labeled, geoparsed, scored above 0.6.
    pub fn statements(&mut self, n: usize) -> Vec<Statement> {
        (0..n)
            .map(|i| {
                let source = *Source::ALL.choose(&mut self.rng).unwrap();
                let impaired = self.rng.gen_bool(0.28);
                let places = self.pick_places();
                let text = self.sentence(&places, impaired);
                let doc = Document {
                    doc_id: format!("syn{i}"),
                    source,
                    published_at: self.date(),
                    title: None,
                    body: text.clone(),
                    url: Some(format!("https://example.org/syn/{i}")),
                };
                let mut s = Statement::new(format!("syn{i}:0"), &doc, text);
                s.movement_score = self.rng.gen_range(0.61..=1.0);
                s.label = Some(if impaired { MovementClass::Impaired } else { MovementClass::Normal });
                let mut from = 0;
                s.places = places
                    .into_iter()
                    .map(|p| {
                        let start = from + s.text[from..].find(&p.name).expect("name in text");
                        from = start + p.name.len();
                        PlaceMention { start, end: from, surface: p.name.clone(), confidence: 1.0, place: p }
                    })
                    .collect();
                s
            })
            .collect()
    }

    /// Raw ingestion records; a share of them carry no movement language.
    pub fn records(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|i| {
                let source = *Source::ALL.choose(&mut self.rng).unwrap();
                let mut body = Vec::new();
                for _ in 0..self.rng.gen_range(1..=3) {
                    if self.rng.gen_bool(0.3) {
                        body.push(format!(
                            "The {} committee met on {} to discuss the budget.",
                            OBJECTS.choose(&mut self.rng).unwrap(),
                            ["Monday", "Tuesday", "Friday"].choose(&mut self.rng).unwrap()
                        ));
                    } else {
                        let impaired = self.rng.gen_bool(0.28);
                        let places = self.pick_places();
                        body.push(self.sentence(&places, impaired));
                    }
                }
                json!({
                    "id": format!("rec{i}"),
                    "source": source.as_str(),
                    "published_at": self.date().format("%Y-%m-%d").to_string(),
                    "text": body.join(" "),
                    "url": format!("https://example.org/rec/{i}"),
                })
                .to_string()
            })
            .collect()
    }

    /// Gazetteer rows for [`PLACES`] in the bundled TSV layout.
    pub fn gazetteer_tsv() -> String {
        PLACES
            .iter()
            .map(|(id, name, lat, lon, cc, a1)| format!("{id}\t{name}\t\t{lat}\t{lon}\tP\t{cc}\t{a1}\t1000000\n"))
            .collect()
    }
}
