use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::skew::{fit_skewnormal, SkewNormalFit};
use super::CalibrationError;
use crate::imbalance::{DepthWeights, PriceDist};
use crate::lob::BookTimeline;
use crate::numeric::{logits_pinned, nelder_mead, softmax_pinned, NelderMeadConfig};

/// Price changes paired with the per-level time integrals of the window that
/// preceded them, so the averaged imbalance can be recomputed for any weights.
#[derive(Debug, Clone, Default)]
pub struct JointSamples {
    levels: usize,
    max_move: usize,
    x: Vec<i64>,
    bid: Vec<f64>,
    total: Vec<f64>,
}

impl JointSamples {
    pub fn new(depth: usize, max_move: usize) -> Self {
        Self { levels: depth + 1, max_move, ..Default::default() }
    }

    /// Adds one sample; `x` is clamped to the support and the integrals are
    /// truncated to the sample depth.
    pub fn push(&mut self, x: i64, bid: &[f64], ask: &[f64]) {
        let m = self.max_move as i64;
        self.x.push(x.clamp(-m, m));
        for k in 0..self.levels {
            let b = bid.get(k).copied().unwrap_or(0.0);
            self.bid.push(b);
            self.total.push(b + ask.get(k).copied().unwrap_or(0.0));
        }
    }

    /// Samples on the grid `start + m f`: the mid change over `[t - f, t]`
    /// in ticks (rounded) against the window integrals over `[t - f, t)`.
    /// Windows with a one-sided book are skipped.
    pub fn from_timeline(timeline: &BookTimeline, f_nanos: i64, depth: usize, max_move: usize) -> Self {
        let mut out = Self::new(depth, max_move);
        let (Some(start), Some(end)) = (timeline.start(), timeline.end()) else {
            return out;
        };
        let mut t = start + f_nanos;
        while t <= end {
            if let (Some(m0), Some(m1)) = (timeline.mid_at(t - f_nanos), timeline.mid_at(t)) {
                let (bid, ask, covered) = timeline.window_integrals(t - f_nanos, t);
                let b: f64 = bid[..=depth.min(bid.len() - 1)].iter().sum();
                let a: f64 = ask[..=depth.min(ask.len() - 1)].iter().sum();
                if covered > 0.0 && b > 0.0 && a > 0.0 {
                    out.push((m1 - m0).round() as i64, &bid, &ask);
                }
            }
            t += f_nanos;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.levels - 1
    }

    pub fn max_move(&self) -> usize {
        self.max_move
    }

    pub fn price_changes(&self) -> &[i64] {
        &self.x
    }

    /// Averaged imbalance of every sample under weights `w`.
    pub fn imbalances(&self, w: &[f64]) -> Vec<f64> {
        let n = self.levels;
        (0..self.len())
            .map(|m| {
                let (b, t) = (&self.bid[m * n..(m + 1) * n], &self.total[m * n..(m + 1) * n]);
                let num: f64 = w.iter().zip(b).map(|(a, b)| a * b).sum();
                let den: f64 = w.iter().zip(t).map(|(a, b)| a * b).sum();
                num / den
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Price term times the fitted skew-normal density of the averaged imbalance.
    Joint,
    /// Price term only.
    PriceOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleConfig {
    pub starts: usize,
    /// Cap on outer refits of the skew-normal factor.
    pub max_iters: usize,
    pub max_evals: usize,
    pub seed: u64,
    pub likelihood: Likelihood,
    /// Weight of the quadratic penalty on `dp+_{-x} > dp+_x`.
    pub penalty: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self { starts: 5, max_iters: 8, max_evals: 6000, seed: 0, likelihood: Likelihood::Joint, penalty: 1e3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleResult {
    pub dp_plus: PriceDist,
    pub weights: DepthWeights,
    pub skew: Option<SkewNormalFit>,
    pub neg_log_likelihood: f64,
    /// Objective after each accepted outer iterate of the winning start.
    pub trace: Vec<f64>,
    pub start: usize,
    pub converged: bool,
}

struct Problem<'a> {
    s: &'a JointSamples,
    likelihood: Likelihood,
    penalty: f64,
}

impl Problem<'_> {
    fn support(&self) -> usize {
        2 * self.s.max_move + 1
    }

    fn unpack(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let np = self.support() - 1;
        (softmax_pinned(&theta[..np]), softmax_pinned(&theta[np..]))
    }

    fn price_nll(&self, dp: &[f64], imb: &[f64]) -> f64 {
        let x0 = self.s.max_move as i64;
        let sum: f64 = self
            .s
            .x
            .iter()
            .zip(imb)
            .map(|(&x, &i)| {
                let p = dp[(x + x0) as usize];
                let m = dp[(x0 - x) as usize];
                (i * p + (1.0 - i) * m).ln()
            })
            .sum();
        -sum / imb.len() as f64
    }

    fn density_nll(&self, imb: &[f64], fit: Option<&SkewNormalFit>) -> f64 {
        match (self.likelihood, fit) {
            (Likelihood::Joint, Some(f)) => -imb.iter().map(|&i| f.params.log_pdf(i)).sum::<f64>() / imb.len() as f64,
            _ => 0.0,
        }
    }

    fn skew_penalty(&self, dp: &[f64]) -> f64 {
        let x0 = self.s.max_move;
        (1..=x0).map(|x| (dp[x0 - x] - dp[x0 + x]).max(0.0).powi(2)).sum::<f64>() * self.penalty
    }

    fn objective(&self, theta: &[f64], fit: Option<&SkewNormalFit>) -> f64 {
        let (dp, w) = self.unpack(theta);
        let imb = self.s.imbalances(&w);
        self.price_nll(&dp, &imb) + self.density_nll(&imb, fit) + self.skew_penalty(&dp)
    }

    fn refit(&self, w: &[f64]) -> Result<Option<SkewNormalFit>, CalibrationError> {
        match self.likelihood {
            Likelihood::Joint => fit_skewnormal(&self.s.imbalances(w)).map(Some),
            Likelihood::PriceOnly => Ok(None),
        }
    }
}

/// Jointly estimates `dp+` and the depth weights by maximum likelihood.
///
/// Block coordinate scheme: the skew-normal factor is refitted at the current
/// weights, then a simplex search over the logits of `dp+` and `w` runs with
/// that factor held fixed. An outer iterate is accepted only if the profiled
/// objective decreases. Several seeded starts run in parallel; the best
/// objective wins, ties going to the lower start index.
pub fn joint_mle(s: &JointSamples, cfg: &MleConfig) -> Result<MleResult, CalibrationError> {
    if s.len() < 2 {
        return Err(CalibrationError::InsufficientSamples { what: "joint likelihood", got: s.len(), need: 2 });
    }
    let problem = Problem { s, likelihood: cfg.likelihood, penalty: cfg.penalty };
    let runs: Vec<Result<MleResult, CalibrationError>> =
        (0..cfg.starts.max(1)).into_par_iter().map(|i| run_start(&problem, cfg, i)).collect();
    let mut best: Option<MleResult> = None;
    for r in runs {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.neg_log_likelihood < b.neg_log_likelihood) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

fn initial_point(p: &Problem, start: usize, seed: u64) -> Vec<f64> {
    let support = p.support();
    let x0 = p.s.max_move as i64;
    let mut hist = vec![1.0; support];
    for &x in &p.s.x {
        hist[(x + x0) as usize] += 1.0;
    }
    // tilt the empirical histogram to the right to seed a right-skewed dp+
    let mut dp: Vec<f64> = (0..support).map(|i| hist[i] * (1.0 + 0.2 * (i as f64 - x0 as f64).signum())).collect();
    let mut w = vec![1.0; p.s.levels];
    if start > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for v in dp.iter_mut() {
            *v *= rng.random_range(0.7..1.3);
        }
        for v in w.iter_mut() {
            *v = rng.random_range(0.2..1.0);
        }
    }
    let norm = |v: Vec<f64>| {
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let mut theta = logits_pinned(&norm(dp));
    theta.extend(logits_pinned(&norm(w)));
    theta
}

fn run_start(p: &Problem, cfg: &MleConfig, start: usize) -> Result<MleResult, CalibrationError> {
    let mut theta = initial_point(p, start, cfg.seed);
    let (_, w0) = p.unpack(&theta);
    let mut fit = p.refit(&w0)?;
    let mut value = p.objective(&theta, fit.as_ref());
    let mut trace = vec![value];
    let mut converged = false;
    let nm = NelderMeadConfig { max_evals: cfg.max_evals, ftol: 1e-11, initial_step: 0.5, restarts: 1 };
    for iter in 0..cfg.max_iters {
        let m = nelder_mead(|t| p.objective(t, fit.as_ref()), &theta, &nm);
        let (_, w) = p.unpack(&m.x);
        let new_fit = p.refit(&w)?;
        let new_value = p.objective(&m.x, new_fit.as_ref());
        debug!(start, iter, value, new_value, evals = m.evals, "outer iterate");
        if !(new_value < value) {
            converged = true;
            break;
        }
        let gain = value - new_value;
        theta = m.x;
        fit = new_fit;
        value = new_value;
        trace.push(value);
        if gain <= 1e-9 * (1.0 + value.abs()) {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(start, "joint likelihood hit the outer iteration cap");
    }
    let (dp, w) = p.unpack(&theta);
    let dp = project_right_skewed(dp, p.s.max_move);
    let dp_plus = PriceDist::new(dp).map_err(|e| CalibrationError::Model(e.to_string()))?;
    let weights = DepthWeights::normalized(w).map_err(|e| CalibrationError::Model(e.to_string()))?;
    let imb = p.s.imbalances(weights.as_slice());
    let nll = p.price_nll(dp_plus.probs(), &imb) + p.density_nll(&imb, fit.as_ref());
    Ok(MleResult { dp_plus, weights, skew: fit, neg_log_likelihood: nll, trace, start, converged })
}

/// Replaces every pair with `p[-x] > p[x]` by its average and renormalizes.
fn project_right_skewed(mut dp: Vec<f64>, x0: usize) -> Vec<f64> {
    for x in 1..=x0 {
        let (l, r) = (dp[x0 - x], dp[x0 + x]);
        if l > r {
            let m = 0.5 * (l + r);
            dp[x0 - x] = m;
            dp[x0 + x] = m;
        }
    }
    let t: f64 = dp.iter().sum();
    dp.into_iter().map(|p| p / t).collect()
}
