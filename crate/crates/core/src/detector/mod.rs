//! Conditional-Wasserstein spoofing monitor.
//!
//! Every market order is marked with the imbalance just before it (`i_minus`)
//! and just after it (`i_plus`). Under legitimate trading `i_minus` given
//! `i_plus` follows a bivariate-normal conditional kernel `K`; under optimal
//! spoofing it follows a skew-normal kernel `K_spoof` fitted to the
//! theoretical spoofed imbalances. The monitor asks which kernel explains a
//! rolling window of marks better in 2-Wasserstein distance.

mod kernels;
mod monitor;
mod transport;

pub use kernels::{BivariateNormal, BivariateSkewNormal, GridSampler, SkewConditional, SAMPLER_GRID};
pub use monitor::{monitor, summarize, FlagEpisode, MonitorConfig, MonitorPoint, MonitorSummary};
pub use transport::{wasserstein2, wasserstein2_in_place};

use serde::{Deserialize, Serialize};

use crate::imbalance::MarketModel;
use crate::lob::{Replay, Side, NANOS_PER_SECOND};
use crate::optimizer::{optimal_spoof_at_depth, SpoofParams};

/// Fewest marks accepted by [`fit_joint_kernels`].
pub const MIN_FIT_MARKS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains non-finite values")]
    NonFinite,
    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("need at least {need} marks, got {got}")]
    InsufficientMarks { got: usize, need: usize },
    #[error("invalid detector config: {0}")]
    Config(String),
}

/// Imbalances around one market order, all expressed from the point of view
/// of the monitored side: for sell orders bid and ask are swapped so the
/// spoofer always pushes the imbalance down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketOrderMark {
    pub t: i64,
    pub side: Side,
    pub i_minus: f64,
    pub i_plus: f64,
    /// Time-averaged shares per level on the side the order consumes.
    pub a_t: f64,
    /// Time-averaged shares per level on the other side.
    pub b_t: f64,
    pub rho_t: f64,
    pub i_spoof: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkConfig {
    /// Length of the pre-order window in seconds.
    pub window_seconds: f64,
    /// Length of the post-order window in seconds.
    pub post_seconds: f64,
    /// Aggressor side to monitor; `Bid` watches buy orders.
    pub side: Side,
}

impl Default for MarkConfig {
    fn default() -> Self {
        Self { window_seconds: 1.0, post_seconds: 1.0, side: Side::Bid }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkSet {
    pub marks: Vec<MarketOrderMark>,
    /// Orders dropped because their pre-order window starts before the stream.
    pub window_underflow: usize,
    /// Orders dropped because a window had no liquidity on a side.
    pub empty_book: usize,
}

/// Marks every market order on `cfg.side` of a replayed stream.
pub fn mark_market_orders(replay: &Replay, model: &MarketModel, cfg: &MarkConfig) -> Result<MarkSet, DetectorError> {
    if !(cfg.window_seconds > 0.0 && cfg.post_seconds > 0.0) {
        return Err(DetectorError::Config("window lengths must be positive".into()));
    }
    let tl = &replay.timeline;
    let depth = model.depth();
    if tl.depth() < depth {
        return Err(DetectorError::Config(format!("replay depth {} is below model depth {depth}", tl.depth())));
    }
    let Some(start) = tl.start() else {
        return Ok(MarkSet { marks: Vec::new(), window_underflow: 0, empty_book: 0 });
    };
    let f = (cfg.window_seconds * NANOS_PER_SECOND).round() as i64;
    let post = (cfg.post_seconds * NANOS_PER_SECOND).round() as i64;
    let w = model.weights().as_slice();
    let orders: Vec<_> = replay.market_orders.iter().filter(|m| m.side == cfg.side).collect();
    let sell = cfg.side == Side::Ask;
    // (own-side, other-side) ordering of a (bid, ask) pair
    let orient = |bid: Vec<f64>, ask: Vec<f64>| if sell { (ask, bid) } else { (bid, ask) };
    let imbalance = |t0: i64, t1: i64| {
        let (bid, ask, covered) = tl.window_integrals(t0, t1);
        let (num, other) = orient(bid, ask);
        let dot = |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let (nb, na) = (dot(&num), dot(&other));
        (covered > 0.0 && nb > 0.0 && na > 0.0).then(|| nb / (nb + na))
    };

    let (mut marks, mut underflow, mut empty) = (Vec::new(), 0, 0);
    let mut lo = 0;
    let mut window_volume = 0u64;
    for (j, mo) in orders.iter().enumerate() {
        let t = mo.timestamp;
        // maintain the order volume in [t - f, t]
        window_volume += mo.volume;
        while orders[lo].timestamp < t - f {
            window_volume -= orders[lo].volume;
            lo += 1;
        }
        debug_assert!(lo <= j);
        if t - f < start {
            underflow += 1;
            continue;
        }
        let (bid, ask, covered) = tl.window_integrals(t - f, t);
        let (own, other) = orient(bid, ask);
        // the order consumes the opposite side of its own book side
        let per_level = |v: &[f64]| v[..=depth].iter().sum::<f64>() / (covered * (depth + 1) as f64);
        let (a_t, b_t) = (per_level(&other), per_level(&own));
        let (Some(i_minus), Some(i_plus)) = (imbalance(t - f, t), imbalance(t, t + post)) else {
            empty += 1;
            continue;
        };
        if !(a_t > 0.0 && b_t > 0.0) {
            empty += 1;
            continue;
        }
        let mut mark = MarketOrderMark {
            t,
            side: cfg.side,
            i_minus,
            i_plus,
            a_t,
            b_t,
            rho_t: window_volume as f64 / a_t,
            i_spoof: i_minus,
        };
        mark.i_spoof = compute_spoof_imbalance(&mark, model);
        marks.push(mark);
    }
    Ok(MarkSet { marks, window_underflow: underflow, empty_book: empty })
}

/// Imbalance the mark would show had an optimal spoofer been active: each
/// depth's volume solves the single-depth optimum at the mark's local book
/// and flow, and all volumes then load the ask side together.
pub fn compute_spoof_imbalance(mark: &MarketOrderMark, model: &MarketModel) -> f64 {
    let ibar = mark.i_minus;
    if !(mark.rho_t > 0.0 && mark.a_t > 0.0 && ibar > 0.0 && ibar < 1.0) {
        return ibar;
    }
    let Ok(p) = SpoofParams::from_model(model, ibar, mark.rho_t, mark.a_t, 0.0) else {
        return ibar;
    };
    let load: f64 = (0..p.depths.len())
        .filter_map(|k| optimal_spoof_at_depth(&p, k).ok())
        .map(|s| p.depths[s.k].w * s.v_spoof)
        .sum();
    if load <= 0.0 {
        return ibar;
    }
    let b = mark.a_t * ibar / (1.0 - ibar);
    b / (mark.a_t + b + load)
}

/// Legitimate and spoofed joint laws of the mark pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointFit {
    /// Law of `(i_minus, i_plus)`.
    pub legit: BivariateNormal,
    /// Law of `(i_spoof, i_plus)`.
    pub spoofed: BivariateSkewNormal,
}

pub fn fit_joint_kernels(marks: &[MarketOrderMark]) -> Result<JointFit, DetectorError> {
    if marks.len() < MIN_FIT_MARKS {
        return Err(DetectorError::InsufficientMarks { got: marks.len(), need: MIN_FIT_MARKS });
    }
    let pre: Vec<f64> = marks.iter().map(|m| m.i_minus).collect();
    let spoof: Vec<f64> = marks.iter().map(|m| m.i_spoof).collect();
    let post: Vec<f64> = marks.iter().map(|m| m.i_plus).collect();
    Ok(JointFit { legit: BivariateNormal::fit(&pre, &post)?, spoofed: BivariateSkewNormal::fit(&spoof, &post)? })
}
