//! Movement-statement extraction, geoparsing, impairment labeling, geo-binning
//! and faceted search.
//!
//! Numeric code is generic over [`scalar::Real`]; the aliases below fix the
//! common instantiations.

pub mod analytics;
pub mod binning;
pub mod breaks;
pub mod corpus;
pub mod geoparse;
pub mod impairment;
pub mod metrics;
pub mod movement;
pub mod pipeline;
pub mod scalar;
pub mod search;
pub mod synth;
pub mod tagging;
pub mod text;

pub use analytics::{BigramCount, Connection, PlacePair, TemporalBucket, YearMonth};
pub use binning::{BinScale, Binner, GeoBin};
pub use breaks::Method;
pub use corpus::{Document, MovementClass, Source, Statement};
pub use geoparse::{Gazetteer, Geoparser, PlaceMention, PlaceRef};
pub use impairment::RuleSet;
pub use metrics::ConfusionMatrix;
pub use search::{Query, ResultPage, SearchIndex};

pub type ClassBreaks64 = breaks::ClassBreaks<f64>;
pub type ClassBreaks32 = breaks::ClassBreaks<f32>;
pub type HexGrid64 = binning::HexGrid<f64>;
pub type HexGrid32 = binning::HexGrid<f32>;
pub type Metrics64 = metrics::Metrics<f64>;
pub type Metrics32 = metrics::Metrics<f32>;
