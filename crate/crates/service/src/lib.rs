//! HTTP API and command-line front end for the geomove engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod server;

pub use api::{handle, ApiState, Response, API_VERSION};
pub use config::ServiceConfig;
