use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub ms: f64,
}

/// Record of one run: enough to repeat it and to find what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Input role (`input`, `truth`, `nodes`) to absolute path.
    pub inputs: BTreeMap<String, PathBuf>,
    /// Every config key with its effective value.
    pub config: BTreeMap<String, String>,
    pub config_files: Vec<PathBuf>,
    pub versions: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
    pub started_at: String,
    pub finished_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_of: Option<PathBuf>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("routine-miner".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("routine-core".to_string(), routine_core::VERSION.to_string()),
    ])
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
