use std::path::{Path, PathBuf};

use bioinvert_core::llm::HttpConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};
use crate::project::BackendKind;

pub const CONFIG_FILE: &str = "bioinvert.toml";

/// Contents of `bioinvert.toml`. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub bind: String,
    pub port: u16,
    pub llm: Option<HttpConfig>,
    pub defaults: Defaults,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: "127.0.0.1".into(),
            port: 7878,
            llm: None,
            defaults: Defaults::default(),
        }
    }
}

/// Stage parameters used when a request leaves them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub backend: BackendKind,
    pub seed: u64,
    pub threshold: f64,
    pub target_size: usize,
    pub ratio_real: f64,
    pub max_rounds: u32,
    pub v: f64,
    pub top_k: usize,
    pub cluster_threshold: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            backend: BackendKind::Lexicon,
            seed: 0,
            threshold: bioinvert_core::corpus::DEFAULT_THRESHOLD,
            target_size: 10_000,
            ratio_real: 0.8,
            max_rounds: bioinvert_core::corpus::DEFAULT_MAX_ROUNDS,
            v: bioinvert_core::decision::DEFAULT_V,
            top_k: 3,
            cluster_threshold: 0.5,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| WorkbenchError::schema(CONFIG_FILE, e.to_string()))
    }

    /// Reads `bioinvert.toml` from `dir` or its parent; defaults when neither has one.
    pub fn discover(dir: &Path) -> Result<Self> {
        match Config::locate(dir) {
            Some(path) => Config::parse(&std::fs::read_to_string(path)?),
            None => Ok(Config::default()),
        }
    }

    fn locate(dir: &Path) -> Option<PathBuf> {
        [Some(dir), dir.parent()]
            .into_iter()
            .flatten()
            .map(|d| d.join(CONFIG_FILE))
            .find(|p| p.is_file())
    }
}
