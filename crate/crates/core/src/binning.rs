//! Geo-bins: continent, country and admin-1 units, plus two flat-top
//! hexagon grids laid out in plate carrée lon/lat space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Statement;
use crate::geoparse::PlaceRef;
use crate::scalar::Real;

pub const DEFAULT_HEX_LARGE: f64 = 5.0;
pub const DEFAULT_HEX_SMALL: f64 = 1.25;

#[derive(Debug, Error)]
pub enum BinError {
    #[error("coordinates ({lat}, {lon}) out of range")]
    OutOfRange { lat: f64, lon: f64 },
    #[error("unknown country code {0:?}")]
    UnknownCountry(String),
    #[error("{0} is not an administrative scale")]
    NotAdminScale(BinScale),
    #[error("bad hexagon sizes: need large > small > 0, got {large} and {small}")]
    BadCellSize { large: f64, small: f64 },
    #[error("bad bin id {0:?}")]
    BadBinId(String),
    #[error("boundary file: {0}")]
    Boundary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScale {
    Continent,
    Country,
    Admin1,
    HexLarge,
    HexSmall,
}

impl BinScale {
    pub const ALL: [BinScale; 5] =
        [BinScale::Continent, BinScale::Country, BinScale::Admin1, BinScale::HexLarge, BinScale::HexSmall];

    pub fn as_str(self) -> &'static str {
        match self {
            BinScale::Continent => "continent",
            BinScale::Country => "country",
            BinScale::Admin1 => "admin1",
            BinScale::HexLarge => "hex_large",
            BinScale::HexSmall => "hex_small",
        }
    }

    pub fn is_hex(self) -> bool {
        matches!(self, BinScale::HexLarge | BinScale::HexSmall)
    }
}

impl fmt::Display for BinScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BinScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "continent" => Ok(BinScale::Continent),
            "country" => Ok(BinScale::Country),
            "admin1" | "admin_1" | "state" => Ok(BinScale::Admin1),
            "hex_large" | "hexlarge" => Ok(BinScale::HexLarge),
            "hex_small" | "hexsmall" => Ok(BinScale::HexSmall),
            other => Err(format!("unknown bin scale {other:?}")),
        }
    }
}

// ---------------------------------------------------------------------------
// Hexagons

/// Axial coordinates of a hexagon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HexCell {
    pub q: i64,
    pub r: i64,
}

impl fmt::Display for HexCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.q, self.r)
    }
}

impl FromStr for HexCell {
    type Err = BinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BinError::BadBinId(s.to_string());
        let (q, r) = s.split_once(':').ok_or_else(bad)?;
        Ok(HexCell { q: q.parse().map_err(|_| bad())?, r: r.parse().map_err(|_| bad())? })
    }
}

/// Flat-top hexagon grid with circumradius `cell_size` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexGrid<T> {
    cell_size: T,
}

fn check_coords<T: Real>(lat: T, lon: T) -> Result<(), BinError> {
    let ok = lat.is_finite()
        && lon.is_finite()
        && lat.abs() <= T::lit(90.0)
        && lon.abs() <= T::lit(180.0);
    if ok {
        Ok(())
    } else {
        Err(BinError::OutOfRange {
            lat: lat.to_f64().unwrap_or(f64::NAN),
            lon: lon.to_f64().unwrap_or(f64::NAN),
        })
    }
}

impl<T: Real> HexGrid<T> {
    /// # Panics
    /// If `cell_size` is not strictly positive.
    pub fn new(cell_size: T) -> Self {
        assert!(cell_size > T::zero(), "hexagon size must be positive");
        HexGrid { cell_size }
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    /// Fractional axial coordinates of a plane point.
    pub fn fractional(&self, x: T, y: T) -> (T, T) {
        let third = T::one() / T::lit(3.0);
        let q = T::lit(2.0) * third * x / self.cell_size;
        let r = (-third * x + T::lit(3.0).sqrt() * third * y) / self.cell_size;
        (q, r)
    }

    /// Cube-coordinate rounding of fractional axial coordinates.
    pub fn round(q: T, r: T) -> HexCell {
        let s = -q - r;
        let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
        let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
        if dq > dr && dq > ds {
            rq = -rr - rs;
        } else if dr > ds {
            rr = -rq - rs;
        }
        HexCell { q: rq.to_i64().expect("finite"), r: rr.to_i64().expect("finite") }
    }

    pub fn cell_at(&self, lat: T, lon: T) -> Result<HexCell, BinError> {
        check_coords(lat, lon)?;
        let (q, r) = self.fractional(lon, lat);
        Ok(Self::round(q, r))
    }

    /// Centre of a cell as `[lon, lat]`.
    pub fn center(&self, cell: HexCell) -> [T; 2] {
        let q = T::lit(cell.q as f64);
        let r = T::lit(cell.r as f64);
        let x = self.cell_size * T::lit(1.5) * q;
        let y = self.cell_size * T::lit(3.0).sqrt() * (r + q / T::lit(2.0));
        [x, y]
    }

    /// Closed ring of the six corners, counter-clockwise, as `[lon, lat]`.
    pub fn polygon(&self, cell: HexCell) -> Vec<[T; 2]> {
        let [cx, cy] = self.center(cell);
        let mut ring: Vec<[T; 2]> = (0..6)
            .map(|i| {
                let a = T::lit(std::f64::consts::PI / 3.0 * i as f64);
                [cx + self.cell_size * a.cos(), cy + self.cell_size * a.sin()]
            })
            .collect();
        ring.push(ring[0]);
        ring
    }
}

/// Bin id ("q:r") of the hexagon containing a point.
pub fn assign_hex<T: Real>(lat: T, lon: T, cell_size: T) -> Result<String, BinError> {
    Ok(HexGrid::new(cell_size).cell_at(lat, lon)?.to_string())
}

// ---------------------------------------------------------------------------
// Administrative units

fn continent_table() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| {
        include_str!("../data/continents.txt")
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| l.split_once(' '))
            .collect()
    })
}

/// Continent code of an ISO country code.
pub fn continent_of(country_code: &str) -> Option<&'static str> {
    continent_table().get(country_code).copied()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinAssignment {
    pub bin_id: String,
    /// The place had no admin-1 code, so the country bin stands in.
    pub coarse: bool,
}

pub fn assign_admin(place: &PlaceRef, scale: BinScale) -> Result<BinAssignment, BinError> {
    let cc = place.country_code.as_str();
    let continent = continent_of(cc).ok_or_else(|| BinError::UnknownCountry(cc.to_string()))?;
    let (bin_id, coarse) = match scale {
        BinScale::Continent => (continent.to_string(), false),
        BinScale::Country => (cc.to_string(), false),
        BinScale::Admin1 => {
            let a1 = place.admin1_code.trim();
            if a1.is_empty() || a1 == "00" {
                (cc.to_string(), true)
            } else {
                (format!("{cc}.{a1}"), false)
            }
        }
        other => return Err(BinError::NotAdminScale(other)),
    };
    Ok(BinAssignment { bin_id, coarse })
}

// ---------------------------------------------------------------------------
// Boundaries

#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub ring: Vec<[f64; 2]>,
    pub centroid: [f64; 2],
}

/// Polygons for administrative bins, keyed by scale and bin id.
#[derive(Debug, Clone, Default)]
pub struct Boundaries {
    polygons: HashMap<(BinScale, String), Boundary>,
}

fn ring_area_centroid(ring: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let mut a2 = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for w in ring.windows(2) {
        let ([x0, y0], [x1, y1]) = (w[0], w[1]);
        let cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if a2.abs() < 1e-12 {
        let n = ring.len().max(1) as f64;
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        return (0.0, [sx / n, sy / n]);
    }
    (a2.abs() / 2.0, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

fn parse_ring(v: &Value) -> Option<Vec<[f64; 2]>> {
    let mut ring: Vec<[f64; 2]> = v
        .as_array()?
        .iter()
        .map(|p| {
            let p = p.as_array()?;
            Some([p.first()?.as_f64()?, p.get(1)?.as_f64()?])
        })
        .collect::<Option<_>>()?;
    if ring.len() < 3 {
        return None;
    }
    if ring.first() != ring.last() {
        ring.push(ring[0]);
    }
    Some(ring)
}

impl Boundaries {
    /// Read a GeoJSON feature collection whose features carry
    /// `country_code`, `admin1_code` and `continent` properties. A feature
    /// with an admin-1 code is an admin-1 unit, one with only a country code
    /// a country, one with only a continent a continent.
    pub fn from_geojson(src: &str) -> Result<Boundaries, BinError> {
        let bad = |m: String| BinError::Boundary(m);
        let doc: Value = serde_json::from_str(src).map_err(|e| bad(e.to_string()))?;
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `features` array".into()))?;
        let mut out = Boundaries::default();
        for (i, f) in features.iter().enumerate() {
            let props = f.get("properties").cloned().unwrap_or(Value::Null);
            let prop = |k: &str| props.get(k).and_then(Value::as_str).map(str::trim).filter(|s| !s.is_empty());
            let key = match (prop("country_code"), prop("admin1_code"), prop("continent")) {
                (Some(cc), Some(a1), _) => (BinScale::Admin1, format!("{cc}.{a1}")),
                (Some(cc), None, _) => (BinScale::Country, cc.to_string()),
                (None, _, Some(ct)) => (BinScale::Continent, ct.to_string()),
                _ => return Err(bad(format!("feature {i} has no bin properties"))),
            };
            let geom = f.get("geometry").ok_or_else(|| bad(format!("feature {i} has no geometry")))?;
            let coords = geom.get("coordinates").ok_or_else(|| bad(format!("feature {i} has no coordinates")))?;
            let polygons: Vec<&Value> = match geom.get("type").and_then(Value::as_str) {
                Some("Polygon") => vec![coords],
                Some("MultiPolygon") => coords.as_array().map(|a| a.iter().collect()).unwrap_or_default(),
                other => return Err(bad(format!("feature {i}: unsupported geometry {other:?}"))),
            };
            let best = polygons
                .into_iter()
                .filter_map(|p| p.as_array()?.first().and_then(parse_ring))
                .map(|ring| (ring_area_centroid(&ring), ring))
                .max_by(|a, b| a.0 .0.total_cmp(&b.0 .0))
                .ok_or_else(|| bad(format!("feature {i}: no usable ring")))?;
            let ((_, centroid), ring) = best;
            out.polygons.insert(key, Boundary { ring, centroid });
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Boundaries, BinError> {
        let src = std::fs::read_to_string(path).map_err(|e| BinError::Boundary(format!("{}: {e}", path.display())))?;
        Boundaries::from_geojson(&src)
    }

    pub fn get(&self, scale: BinScale, bin_id: &str) -> Option<&Boundary> {
        self.polygons.get(&(scale, bin_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Aggregation

/// Assigns places to bins at every scale.
#[derive(Debug, Clone)]
pub struct Binner {
    hex_large: HexGrid<f64>,
    hex_small: HexGrid<f64>,
    boundaries: Boundaries,
}

impl Default for Binner {
    fn default() -> Self {
        Binner::new(DEFAULT_HEX_LARGE, DEFAULT_HEX_SMALL).expect("default sizes valid")
    }
}

impl Binner {
    pub fn new(hex_large: f64, hex_small: f64) -> Result<Binner, BinError> {
        if !(hex_small > 0.0 && hex_large > hex_small && hex_large.is_finite()) {
            return Err(BinError::BadCellSize { large: hex_large, small: hex_small });
        }
        Ok(Binner {
            hex_large: HexGrid::new(hex_large),
            hex_small: HexGrid::new(hex_small),
            boundaries: Boundaries::default(),
        })
    }

    pub fn with_boundaries(mut self, boundaries: Boundaries) -> Self {
        self.boundaries = boundaries;
        self
    }

    pub fn boundaries(&self) -> &Boundaries {
        &self.boundaries
    }

    pub fn hex_grid(&self, scale: BinScale) -> Option<&HexGrid<f64>> {
        match scale {
            BinScale::HexLarge => Some(&self.hex_large),
            BinScale::HexSmall => Some(&self.hex_small),
            _ => None,
        }
    }

    pub fn assign(&self, place: &PlaceRef, scale: BinScale) -> Result<BinAssignment, BinError> {
        match self.hex_grid(scale) {
            Some(grid) => Ok(BinAssignment { bin_id: grid.cell_at(place.lat, place.lon)?.to_string(), coarse: false }),
            None => assign_admin(place, scale),
        }
    }

    /// Distinct bins touched by a statement's mentions. Mentions that cannot
    /// be binned are skipped.
    pub fn statement_bins(&self, stmt: &Statement, scale: BinScale) -> BTreeSet<String> {
        stmt.places.iter().filter_map(|m| self.assign(&m.place, scale).ok()).map(|a| a.bin_id).collect()
    }

    pub fn geometry(&self, scale: BinScale, bin_id: &str) -> Option<Vec<[f64; 2]>> {
        match self.hex_grid(scale) {
            Some(grid) => bin_id.parse().ok().map(|c| grid.polygon(c)),
            None => self.boundaries.get(scale, bin_id).map(|b| b.ring.clone()),
        }
    }

    /// Centroid from the hexagon or boundary polygon, when one is known.
    pub fn centroid(&self, scale: BinScale, bin_id: &str) -> Option<[f64; 2]> {
        match self.hex_grid(scale) {
            Some(grid) => bin_id.parse().ok().map(|c| grid.center(c)),
            None => self.boundaries.get(scale, bin_id).map(|b| b.centroid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoBin {
    pub bin_id: String,
    pub scale: BinScale,
    /// Closed `[lon, lat]` ring; absent for admin units without a boundary.
    pub geometry: Option<Vec<[f64; 2]>>,
    /// `[lon, lat]`; falls back to the mean of the binned places.
    pub centroid: [f64; 2],
    /// Distinct statements with at least one mention in the bin.
    pub count: u64,
    /// Some mention only resolved to country level at admin-1 scale.
    pub coarse: bool,
}

#[derive(Default)]
struct BinAcc {
    count: u64,
    coarse: bool,
    places: BTreeMap<u64, [f64; 2]>,
}

/// Count distinct statements per bin. Bins without statements are omitted;
/// output is sorted by bin id.
pub fn aggregate_counts<'a, I>(stmts: I, scale: BinScale, binner: &Binner) -> Vec<GeoBin>
where
    I: IntoIterator<Item = &'a Statement>,
{
    let mut acc: BTreeMap<String, BinAcc> = BTreeMap::new();
    for stmt in stmts {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for m in &stmt.places {
            let Ok(a) = binner.assign(&m.place, scale) else { continue };
            let e = acc.entry(a.bin_id.clone()).or_default();
            e.coarse |= a.coarse;
            e.places.insert(m.place.place_id, [m.place.lon, m.place.lat]);
            if seen.insert(a.bin_id) {
                e.count += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(bin_id, a)| {
            let centroid = binner.centroid(scale, &bin_id).unwrap_or_else(|| {
                let n = a.places.len() as f64;
                let (x, y) = a.places.values().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
                [x / n, y / n]
            });
            GeoBin { geometry: binner.geometry(scale, &bin_id), bin_id, scale, centroid, count: a.count, coarse: a.coarse }
        })
        .collect()
}
