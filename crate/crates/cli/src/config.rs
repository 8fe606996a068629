//! Optional TOML configuration. Every key has a command-line flag that
//! takes precedence over it.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//!
//! [aggregator]
//! idle_timeout = 60.0
//!
//! [optimize]
//! population_size = 10
//! generation_limit = 10
//!
//! [detect]
//! models_dir = "models"
//! listen = "127.0.0.1:9000"
//!
//! [pool.RandomForest.n_estimators]
//! low = 10
//! high = 400
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flowhunter::classifiers::ClassifierKind;
use flowhunter::optimize::GeneOverride;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub aggregator: AggregatorSection,
    #[serde(default)]
    pub crossval: CrossvalSection,
    #[serde(default)]
    pub select: SelectSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub detect: DetectSection,
    /// Gene domain overrides keyed by classifier, then gene.
    #[serde(default)]
    pub pool: BTreeMap<String, BTreeMap<String, GeneOverride>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregatorSection {
    pub idle_timeout: Option<f64>,
    pub active_timeout: Option<f64>,
    pub status_interval: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalSection {
    pub folds: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    pub top_k: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub population_size: Option<usize>,
    pub generation_limit: Option<usize>,
    pub folds: Option<usize>,
    pub iterations: Option<usize>,
    pub grid_cap: Option<u128>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectSection {
    pub models_dir: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub alert_log: Option<PathBuf>,
    pub flow_log: Option<PathBuf>,
    pub listen: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Config::parse(&text).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> CliResult<Config> {
        toml::from_str(text).map_err(|e| CliError::usage(e.message()))
    }

    pub fn pool_overrides(&self, kind: ClassifierKind) -> CliResult<BTreeMap<String, GeneOverride>> {
        let mut out = BTreeMap::new();
        for (name, genes) in &self.pool {
            let k: ClassifierKind = name.parse().map_err(|_| CliError::usage(format!("[pool]: unknown classifier {name:?}")))?;
            if k == kind {
                out.extend(genes.clone());
            }
        }
        Ok(out)
    }
}
