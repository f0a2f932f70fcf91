// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

mod commands;
mod config;
mod output;

use config::ConfigError;

/// Order book imbalance model, spoofing optimizer, calibration and monitor.
///
/// Any other `--section.key VALUE` (or `--section.key=VALUE`) flag overrides
/// the matching entry of the TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "spoofwatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    instrument: Option<String>,
    #[arg(long, global = true)]
    events: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Replay an event stream and dump the book timeline and market orders.
    Reconstruct,
    /// Fit the market model to an event stream.
    Calibrate,
    /// Solve the spoofer's problem for a model or explicit depth tails.
    Optimize,
    /// Run the rolling spoofing monitor on an event stream.
    Monitor,
    /// Generate a synthetic market with labeled spoofing episodes.
    Simulate,
    /// Chi-square test of a model against an event stream.
    Gof,
}

const KNOWN_FLAGS: [&str; 8] = ["config", "seed", "out", "instrument", "events", "model", "help", "version"];

type Overrides = Vec<(String, String)>;

/// Splits argv into what clap understands and dotted config overrides.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), ConfigError> {
    let mut known = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    if let Some(bin) = it.next() {
        known.push(bin);
    }
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            known.push(arg);
            continue;
        };
        let name = body.split('=').next().unwrap_or_default();
        if body.is_empty() || KNOWN_FLAGS.contains(&name) {
            known.push(arg);
            continue;
        }
        match body.split_once('=') {
            Some((key, value)) => overrides.push((key.to_string(), value.to_string())),
            None => {
                let value = it.next().ok_or_else(|| ConfigError(format!("flag --{body} needs a value")))?;
                overrides.push((body.to_string(), value));
            }
        }
    }
    Ok((known, overrides))
}

fn run() -> anyhow::Result<()> {
    let (args, mut overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => e.exit(),
        _ => ConfigError(e.to_string().trim_end().to_string()),
    })?;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(name) = &cli.instrument {
        overrides.push(("instrument".into(), toml_string(name)));
    }
    for (key, path) in [("paths.out", &cli.out), ("paths.events", &cli.events), ("paths.model", &cli.model)] {
        if let Some(p) = path {
            overrides.push((key.into(), toml_string(&p.to_string_lossy())));
        }
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    tracing::info!(command = ?cli.command, instrument = %cfg.instrument, "starting");
    match cli.command {
        Command::Reconstruct => commands::reconstruct(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Optimize => commands::optimize(&cfg),
        Command::Monitor => commands::monitor(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Gof => commands::gof(&cfg),
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("SPOOFWATCH_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = output::classify(&err);
            let report = serde_json::json!({
                "error": kind,
                "message": err.to_string(),
                "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{report}");
            ExitCode::from(code)
        }
    }
}
