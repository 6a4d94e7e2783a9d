//! Effective run configuration, layered from defaults, config files and flags.
//!
//! Config files are flat `key = value` text; `#` starts a comment. Later layers
//! override earlier ones, so applying defaults, the environment's default
//! file, an explicit file and finally command-line flags gives
//! flag > file > default.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use routine_core::baseline::BaselineConfig;
use routine_core::miner::{MinerConfig, SweepRange, Threshold};
use routine_core::model::IngestConfig;

pub const CONFIG_ENV: &str = "ROUTINE_MINER_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub slot_minutes: u32,
    pub min_images_per_slot: usize,
    pub object_min_count: usize,
    pub object_conf_min: f64,
    pub frq: f64,
    pub dim: usize,
    pub sigma: f64,
    pub threshold: Option<f64>,
    pub sweep: SweepRange,
    pub k: Option<f64>,
    pub min_pattern_nodes: usize,
    pub min_pattern_days: usize,
    pub max_patterns: Option<usize>,
    pub min_silhouette: f64,
    pub eps: f64,
    pub min_pts: usize,
    pub time_weight: f64,
    pub seed: u64,
    pub svg: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let ingest = IngestConfig::default();
        let miner = MinerConfig::default();
        let base = BaselineConfig::default();
        Self {
            slot_minutes: ingest.slot_minutes,
            min_images_per_slot: ingest.min_images_per_slot,
            object_min_count: ingest.object_min_count,
            object_conf_min: ingest.object_conf_min,
            frq: ingest.frq,
            dim: 2,
            sigma: miner.sigma,
            threshold: None,
            sweep: SweepRange::default(),
            k: miner.variance_cap,
            min_pattern_nodes: miner.min_pattern_nodes,
            min_pattern_days: miner.min_pattern_days,
            max_patterns: miner.max_patterns,
            min_silhouette: miner.min_silhouette,
            eps: base.eps,
            min_pts: base.min_pts,
            time_weight: base.time_weight,
            seed: 0,
            svg: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn show<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

pub fn parse_sweep(value: &str) -> Result<SweepRange> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        bail!("sweep must be lo:hi:step, got {value:?}");
    }
    let range = SweepRange {
        lo: parse("sweep", parts[0])?,
        hi: parse("sweep", parts[1])?,
        step: parse("sweep", parts[2])?,
    };
    range.validate()?;
    Ok(range)
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "slot_minutes" => self.slot_minutes = parse(key, value)?,
            "min_images_per_slot" => self.min_images_per_slot = parse(key, value)?,
            "object_min_count" => self.object_min_count = parse(key, value)?,
            "object_conf_min" => self.object_conf_min = parse(key, value)?,
            "frq" => self.frq = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "threshold" => self.threshold = optional(key, value)?,
            "sweep" => self.sweep = parse_sweep(value)?,
            "K" => self.k = optional(key, value)?,
            "min_pattern_nodes" => self.min_pattern_nodes = parse(key, value)?,
            "min_pattern_days" => self.min_pattern_days = parse(key, value)?,
            "max_patterns" => self.max_patterns = optional(key, value)?,
            "min_silhouette" => self.min_silhouette = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "min_pts" => self.min_pts = parse(key, value)?,
            "time_weight" => self.time_weight = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "svg" => self.svg = parse(key, value)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies `key = value` lines.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config file {}", path.display()))
    }

    pub fn apply_map(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in map {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Every key with its effective value, as written to the manifest.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let s = &self.sweep;
        [
            ("slot_minutes", self.slot_minutes.to_string()),
            ("min_images_per_slot", self.min_images_per_slot.to_string()),
            ("object_min_count", self.object_min_count.to_string()),
            ("object_conf_min", self.object_conf_min.to_string()),
            ("frq", self.frq.to_string()),
            ("dim", self.dim.to_string()),
            ("sigma", self.sigma.to_string()),
            ("threshold", show(&self.threshold)),
            ("sweep", format!("{}:{}:{}", s.lo, s.hi, s.step)),
            ("K", show(&self.k)),
            ("min_pattern_nodes", self.min_pattern_nodes.to_string()),
            ("min_pattern_days", self.min_pattern_days.to_string()),
            ("max_patterns", show(&self.max_patterns)),
            ("min_silhouette", self.min_silhouette.to_string()),
            ("eps", self.eps.to_string()),
            ("min_pts", self.min_pts.to_string()),
            ("time_weight", self.time_weight.to_string()),
            ("seed", self.seed.to_string()),
            ("svg", self.svg.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn ingest(&self) -> IngestConfig {
        IngestConfig {
            slot_minutes: self.slot_minutes,
            min_images_per_slot: self.min_images_per_slot,
            object_min_count: self.object_min_count,
            object_conf_min: self.object_conf_min,
            frq: self.frq,
        }
    }

    pub fn miner(&self) -> MinerConfig {
        MinerConfig {
            variance_cap: self.k,
            sigma: self.sigma,
            threshold: match self.threshold {
                Some(t) => Threshold::Fixed(t),
                None => Threshold::Sweep(self.sweep),
            },
            min_pattern_nodes: self.min_pattern_nodes,
            min_pattern_days: self.min_pattern_days,
            max_patterns: self.max_patterns,
            min_silhouette: self.min_silhouette,
            frq: self.frq,
        }
    }

    pub fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            eps: self.eps,
            min_pts: self.min_pts,
            time_weight: self.time_weight,
        }
    }
}
