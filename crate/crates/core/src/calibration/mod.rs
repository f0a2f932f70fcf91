//! Model calibration from a replayed stream: sampling frequency and depth,
//! the market-order sweep law, the skew-normal imbalance law, the joint
//! likelihood for `dp+` and the depth weights, and a bucketed chi-square test.

mod gof;
mod mle;
mod skew;

pub use gof::{chi_square_gof, BucketGof, MIN_EXPECTED};
pub use mle::{joint_mle, JointSamples, Likelihood, MleConfig, MleResult};
pub use skew::{fit_skewnormal, SkewNormalFit, SkewNormalParams, MIN_SKEW_SAMPLES};

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::imbalance::{DepthWeights, MarketModel, PriceDist};
use crate::lob::{tick_depth, BookTimeline, LobError, MarketOrder, Replay, Side, NANOS_PER_SECOND};

pub const MIN_FREQUENCY_SAMPLES: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("{what}: {got} samples, need at least {need}")]
    InsufficientSamples { what: &'static str, got: usize, need: usize },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
}

/// Non-overlapping mid-price changes in ticks, rounded, over windows of
/// length `f_nanos` starting at the first book state.
pub fn price_changes(timeline: &BookTimeline, f_nanos: i64) -> Vec<f64> {
    let (Some(start), Some(end)) = (timeline.start(), timeline.end()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut t = start + f_nanos;
    while t <= end {
        if let (Some(a), Some(b)) = (timeline.mid_at(t - f_nanos), timeline.mid_at(t)) {
            out.push((b - a).round());
        }
        t += f_nanos;
    }
    out
}

fn price_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Picks the candidate frequency whose price-change standard deviation is
/// closest to `sqrt(target_variance)`; ties go to the smaller frequency.
pub fn select_frequency(candidates: &[(f64, Vec<f64>)], target_variance: f64) -> Result<f64, CalibrationError> {
    if candidates.len() < 2 {
        return Err(CalibrationError::InsufficientSamples {
            what: "frequency candidates",
            got: candidates.len(),
            need: 2,
        });
    }
    if !(target_variance > 0.0) {
        return Err(CalibrationError::Config("target variance must be positive".into()));
    }
    let target = target_variance.sqrt();
    let mut best: Option<(f64, f64)> = None;
    let mut sorted: Vec<&(f64, Vec<f64>)> = candidates.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (f, xs) in sorted {
        if xs.len() < MIN_FREQUENCY_SAMPLES {
            return Err(CalibrationError::InsufficientSamples {
                what: "price changes",
                got: xs.len(),
                need: MIN_FREQUENCY_SAMPLES,
            });
        }
        let d = (price_variance(xs).sqrt() - target).powi(2);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((*f, d));
        }
    }
    Ok(best.expect("nonempty").0)
}

/// Smallest `N` whose empirical CDF of absolute price changes reaches `quantile`.
pub fn select_depth(abs_changes: &[f64], quantile: f64) -> Result<usize, CalibrationError> {
    if abs_changes.is_empty() {
        return Err(CalibrationError::InsufficientSamples { what: "depth selection", got: 0, need: 1 });
    }
    let mut v: Vec<f64> = abs_changes.iter().map(|x| x.abs()).collect();
    v.sort_by(f64::total_cmp);
    Ok(crate::numeric::quantile_sorted(&v, quantile).ceil() as usize)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DqEstimate {
    /// Signed sweep depths: positive for buys, negative for sells.
    pub empirical: PriceDist,
    /// Half-sum with the mirror image; zero mean by construction.
    pub symmetric: PriceDist,
    pub used: usize,
    /// Orders skipped because they exceeded the visible liquidity or had no pre-trade book.
    pub skipped: usize,
}

/// Empirical law of the tick depth swept by market orders, clamped to `max_move`.
pub fn estimate_dq(orders: &[MarketOrder], max_move: usize) -> Result<DqEstimate, CalibrationError> {
    let mut counts = vec![0.0; 2 * max_move + 1];
    let (mut used, mut skipped) = (0usize, 0usize);
    for mo in orders {
        let Some(book) = &mo.pre_trade else {
            skipped += 1;
            continue;
        };
        let levels = book.levels(mo.side.opposite());
        match tick_depth(levels, mo.volume) {
            Ok(f) => {
                let y = f.min(max_move) as i64;
                let y = if mo.side == Side::Bid { y } else { -y };
                counts[(y + max_move as i64) as usize] += 1.0;
                used += 1;
            }
            Err(LobError::InsufficientLiquidity { .. }) => skipped += 1,
            Err(_) => skipped += 1,
        }
    }
    if used == 0 {
        return Err(CalibrationError::InsufficientSamples { what: "market orders", got: 0, need: 1 });
    }
    let probs: Vec<f64> = counts.iter().map(|c| c / used as f64).collect();
    let empirical = PriceDist::new(probs).map_err(|e| CalibrationError::Model(e.to_string()))?;
    let symmetric = empirical.symmetrized();
    Ok(DqEstimate { empirical, symmetric, used, skipped })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target_variance: f64,
    /// Candidate sampling frequencies in seconds.
    pub candidate_frequencies: Vec<f64>,
    pub depth_quantile: f64,
    /// Overrides the selected depth when set.
    pub depth: Option<usize>,
    /// Overrides the selected frequency when set.
    pub frequency: Option<f64>,
    pub gof_buckets: usize,
    pub tick_size: f64,
    pub mle: MleConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            target_variance: 2.0,
            candidate_frequencies: (1..=60).map(f64::from).collect(),
            depth_quantile: 0.99,
            depth: None,
            frequency: None,
            gof_buckets: 20,
            tick_size: 0.01,
            mle: MleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpMoments {
    pub mu_plus: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub frequency_seconds: f64,
    pub depth: usize,
    pub weights: DepthWeights,
    pub dp_plus: PriceDist,
    pub dq: PriceDist,
    pub dq_empirical: PriceDist,
    pub skew_fit: Option<SkewNormalFit>,
    pub moments: DpMoments,
    pub neg_log_likelihood: f64,
    pub converged: bool,
    pub samples: usize,
    pub market_orders_used: usize,
    pub market_orders_skipped: usize,
    pub tick_size: f64,
    /// `(frequency, price-change variance)` for every candidate.
    pub frequency_scan: Vec<(f64, f64)>,
    pub gof: Vec<BucketGof>,
}

impl CalibrationResult {
    pub fn model(&self) -> Result<MarketModel, CalibrationError> {
        MarketModel::new(self.weights.clone(), self.dp_plus.clone(), self.dq.clone(), self.tick_size)
            .map_err(|e| CalibrationError::Model(e.to_string()))
    }
}

fn nanos(seconds: f64) -> i64 {
    (seconds * NANOS_PER_SECOND).round() as i64
}

/// Full calibration of a replayed stream.
pub fn calibrate(replay: &Replay, cfg: &CalibrationConfig) -> Result<CalibrationResult, CalibrationError> {
    let tl = &replay.timeline;
    let frequency_scan: Vec<(f64, Vec<f64>)> =
        cfg.candidate_frequencies.iter().map(|&f| (f, price_changes(tl, nanos(f)))).collect();
    let f = match cfg.frequency {
        Some(f) => f,
        None => select_frequency(&frequency_scan, cfg.target_variance)?,
    };
    let changes = price_changes(tl, nanos(f));
    let depth = match cfg.depth {
        Some(n) => n,
        None => select_depth(&changes, cfg.depth_quantile)?,
    };
    if depth > tl.depth() {
        return Err(CalibrationError::Config(format!("depth {depth} exceeds the replayed depth {}", tl.depth())));
    }
    info!(frequency = f, depth, "sampling grid selected");
    let samples = JointSamples::from_timeline(tl, nanos(f), depth, depth);
    let dq = estimate_dq(&replay.market_orders, depth)?;
    let fit = joint_mle(&samples, &cfg.mle)?;
    let imb = samples.imbalances(fit.weights.as_slice());
    let gof = chi_square_gof(&fit.dp_plus, samples.price_changes(), &imb, cfg.gof_buckets)?;
    let (mu_plus, variance, skewness, kurtosis) = fit.dp_plus.moments();
    Ok(CalibrationResult {
        frequency_seconds: f,
        depth,
        weights: fit.weights,
        dp_plus: fit.dp_plus,
        dq: dq.symmetric,
        dq_empirical: dq.empirical,
        skew_fit: fit.skew,
        moments: DpMoments { mu_plus, variance, skewness, kurtosis },
        neg_log_likelihood: fit.neg_log_likelihood,
        converged: fit.converged,
        samples: samples.len(),
        market_orders_used: dq.used,
        market_orders_skipped: dq.skipped,
        tick_size: cfg.tick_size,
        frequency_scan: frequency_scan
            .iter()
            .map(|(f, xs)| (*f, if xs.is_empty() { f64::NAN } else { price_variance(xs) }))
            .collect(),
        gof,
    })
}
