use std::path::{Path, PathBuf};

use geomove_core::binning::{DEFAULT_HEX_LARGE, DEFAULT_HEX_SMALL};
use geomove_core::breaks::{MAX_CLASSES, MIN_CLASSES};
use geomove_core::movement::DEFAULT_THRESHOLD;
use geomove_core::Method;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "GEOMOVE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0} does not exist")]
    MissingPath(PathBuf),
    #[error("invalid setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub gazetteer: PathBuf,
    pub boundaries: Option<PathBuf>,
    pub movement_lexicon: Option<PathBuf>,
    /// Rule file; the bundled modified rule set when absent.
    pub rules: Option<PathBuf>,
    pub index_dir: PathBuf,
    pub threshold: f64,
    pub default_method: Method,
    pub default_k: usize,
    pub hex_large: f64,
    pub hex_small: f64,
    /// Allowed browser origins; empty disables CORS headers.
    pub cors_allowlist: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            gazetteer: PathBuf::from("data/gazetteer.tsv"),
            boundaries: None,
            movement_lexicon: None,
            rules: None,
            index_dir: PathBuf::from("data/index"),
            threshold: DEFAULT_THRESHOLD,
            default_method: Method::Jenks,
            default_k: 5,
            hex_large: DEFAULT_HEX_LARGE,
            hex_small: DEFAULT_HEX_SMALL,
            cors_allowlist: Vec::new(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(src: &str, path: &Path) -> Result<ServiceConfig, ConfigError> {
        let mut cfg: ServiceConfig =
            toml::from_str(src).map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    /// Read a TOML file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let src =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        ServiceConfig::from_toml(&src, path)
    }

    /// `explicit`, else `$GEOMOVE_CONFIG`, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<ServiceConfig, ConfigError> {
        match explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from)) {
            Some(p) => ServiceConfig::load(&p),
            None => Ok(ServiceConfig::default()),
        }
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.gazetteer);
        fix(&mut self.index_dir);
        for p in [&mut self.boundaries, &mut self.movement_lexicon, &mut self.rules].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(MIN_CLASSES..=MAX_CLASSES).contains(&self.default_k) {
            return Err(ConfigError::Invalid(format!("default_k {} outside {MIN_CLASSES}..={MAX_CLASSES}", self.default_k)));
        }
        if !(self.hex_small > 0.0 && self.hex_large > self.hex_small) {
            return Err(ConfigError::Invalid("need hex_large > hex_small > 0".into()));
        }
        self.listen.parse::<std::net::SocketAddr>().map_err(|e| ConfigError::Invalid(format!("listen: {e}")))?;
        Ok(())
    }

    /// Validation plus existence of the files the pipeline reads.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        self.validate()?;
        let required = [Some(&self.gazetteer), self.boundaries.as_ref(), self.movement_lexicon.as_ref(), self.rules.as_ref()];
        for p in required.into_iter().flatten() {
            if !p.exists() {
                return Err(ConfigError::MissingPath(p.clone()));
            }
        }
        Ok(())
    }
}
