use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spoofwatch_core::calibration::CalibrationConfig;
use spoofwatch_core::detector::{MarkConfig, MonitorConfig};
use spoofwatch_core::optimizer::DepthTail;
use spoofwatch_core::synth::SimConfig;

/// Configuration problems get their own type so the error report can tell
/// them apart from I/O and model failures.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub instrument: String,
    pub tick_size: f64,
    /// Root seed. When set it replaces the seeds of the simulation, the MLE
    /// starts and the monitor resampling.
    pub seed: Option<u64>,
    /// Book levels kept when replaying an event stream.
    pub replay_depth: usize,
    pub paths: Paths,
    pub calibrate: CalibrationConfig,
    pub optimize: OptimizeConfig,
    pub marks: MarkConfig,
    pub monitor: MonitorConfig,
    pub simulate: SimConfig,
    pub gof: GofConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instrument: "SYNTH".into(),
            tick_size: 0.01,
            seed: None,
            replay_depth: 10,
            paths: Paths::default(),
            calibrate: CalibrationConfig::default(),
            optimize: OptimizeConfig::default(),
            marks: MarkConfig::default(),
            monitor: MonitorConfig::default(),
            simulate: SimConfig::default(),
            gof: GofConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Level-2 event CSV.
    pub events: Option<PathBuf>,
    /// Calibrated model JSON.
    pub model: Option<PathBuf>,
    /// Separate stream to fit the monitor kernels on; defaults to `events`.
    pub train_events: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub ibar: f64,
    pub rho: f64,
    pub a: f64,
    pub price: f64,
    /// Explicit per-depth tails; when set, `mu_plus` must be set too and no model is read.
    pub depths: Option<Vec<DepthTail>>,
    pub mu_plus: Option<f64>,
    /// Points of the imbalance grid used for the curve outputs.
    pub curve_points: usize,
    /// Half spread in ticks for the round-trip map.
    pub spread: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { ibar: 0.5, rho: 2.0, a: 100.0, price: 0.0, depths: None, mu_plus: None, curve_points: 99, spread: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GofConfig {
    /// Sampling period in seconds.
    pub frequency: f64,
    pub buckets: usize,
}

impl Default for GofConfig {
    fn default() -> Self {
        Self { frequency: 1.0, buckets: 20 }
    }
}

/// Loads the TOML file (if any), applies `key = value` overrides on dotted
/// paths, and deserializes the result.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut tree = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            text.parse::<toml::Table>().map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for (key, raw) in overrides {
        set_dotted(&mut tree, key, parse_value(raw))?;
    }
    let cfg: RunConfig =
        toml::Value::Table(tree).try_into().map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    if !(cfg.tick_size > 0.0) {
        bail!(ConfigError(format!("tick_size must be positive, got {}", cfg.tick_size)));
    }
    Ok(cfg.resolved())
}

impl RunConfig {
    /// Pushes the shared settings down into the module sections.
    fn resolved(mut self) -> Self {
        if let Some(seed) = self.seed {
            self.simulate.seed = seed;
            self.calibrate.mle.seed = seed;
            self.monitor.seed = seed;
        }
        self.calibrate.tick_size = self.tick_size;
        self.simulate.tick_size = self.tick_size;
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// A flag value is read as a TOML literal when it parses as one, otherwise as a string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(tree: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(ConfigError(format!("malformed override key `{key}`")));
    }
    let mut node = tree;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("override `{key}` descends into non-table `{part}`")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
