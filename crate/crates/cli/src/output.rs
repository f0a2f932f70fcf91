use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use spoofwatch_core::calibration::CalibrationError;
use spoofwatch_core::detector::DetectorError;
use spoofwatch_core::imbalance::ImbalanceError;
use spoofwatch_core::lob::LobError;
use spoofwatch_core::optimizer::OptimizerError;
use spoofwatch_core::synth::SimError;

use crate::config::ConfigError;

/// Floats are written with 17 significant digits so they read back exactly.
pub fn f(x: f64) -> String {
    format!("{x:.16e}")
}

/// In-memory CSV table; rows are joined with `\n` and written in one go.
pub struct Table {
    width: usize,
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self::with_header(header.iter().map(|h| h.to_string()).collect())
    }

    pub fn with_header(header: Vec<String>) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { width: header.len(), text }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.width);
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        write_text(dir, name, &self.text)
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    tracing::debug!(path = %path.display(), bytes = text.len(), "wrote output");
    Ok(())
}

/// Error kind and exit status for the stderr report.
pub fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return ("config", 2);
        }
        if cause.is::<std::io::Error>() {
            return ("io", 3);
        }
        let kind = if cause.is::<LobError>() {
            "lob"
        } else if cause.is::<CalibrationError>() {
            "calibration"
        } else if cause.is::<OptimizerError>() {
            "optimizer"
        } else if cause.is::<DetectorError>() {
            "detector"
        } else if cause.is::<SimError>() {
            "simulation"
        } else if cause.is::<ImbalanceError>() {
            "model"
        } else {
            continue;
        };
        return (kind, 1);
    }
    ("internal", 1)
}
