use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{wasserstein2_in_place, DetectorError, JointFit, MarketOrderMark};
use crate::imbalance::{tail_stats, MarketModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Marks per rolling window.
    pub window: usize,
    /// Equal-count buckets of the post-order imbalance.
    pub buckets: usize,
    /// Resampling repetitions averaged into each distance.
    pub repetitions: usize,
    /// A flag needs strictly more than this many consecutive spoof-closer windows.
    pub consecutive: usize,
    pub seed: u64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { window: 100, buckets: 5, repetitions: 10, consecutive: 10, seed: 0 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.buckets == 0 || self.window < self.buckets || !self.window.is_multiple_of(self.buckets) {
            return Err(DetectorError::Config(format!(
                "{} buckets must divide a window of {}",
                self.buckets, self.window
            )));
        }
        if self.repetitions == 0 {
            return Err(DetectorError::Config("at least one repetition is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorPoint {
    pub t: i64,
    pub d_legit: f64,
    pub d_spoof: f64,
    pub no_spoof_region: bool,
    pub flagged: bool,
}

/// Rolling comparison of the last `window` marks against both kernels. One
/// point is produced per mark from the `window`-th on.
pub fn monitor(
    marks: &[MarketOrderMark],
    fit: &JointFit,
    model: &MarketModel,
    cfg: &MonitorConfig,
) -> Result<Vec<MonitorPoint>, DetectorError> {
    cfg.validate()?;
    if marks.len() < cfg.window {
        return Err(DetectorError::InsufficientMarks { got: marks.len(), need: cfg.window });
    }
    let tails: Vec<(f64, f64, f64)> = (0..=model.depth())
        .map(|k| {
            let (q, nu) = tail_stats(model.dq(), k);
            (model.weights().get(k), q, nu)
        })
        .collect();
    let mu = model.mu_plus();
    let distances: Vec<(f64, f64)> = (cfg.window - 1..marks.len())
        .into_par_iter()
        .map(|end| window_distances(&marks[end + 1 - cfg.window..=end], fit, cfg, end as u64))
        .collect();

    let mut run = 0usize;
    let points = distances
        .iter()
        .zip(&marks[cfg.window - 1..])
        .enumerate()
        .map(|(j, (&(d_legit, d_spoof), m))| {
            let window = &marks[j..j + cfg.window];
            let n = cfg.window as f64;
            let rho = window.iter().map(|m| m.rho_t).sum::<f64>() / n;
            let ibar = window.iter().map(|m| m.i_plus).sum::<f64>() / n;
            let sup = tails
                .iter()
                .map(|&(w, q, nu)| 2.0 * rho * mu * (1.0 - ibar) * ibar * w - q * rho - nu)
                .fold(f64::NEG_INFINITY, f64::max);
            let no_spoof_region = sup <= 0.0;
            run = if d_spoof <= d_legit { run + 1 } else { 0 };
            MonitorPoint {
                t: m.t,
                d_legit,
                d_spoof,
                no_spoof_region,
                flagged: run > cfg.consecutive && !no_spoof_region,
            }
        })
        .collect();
    Ok(points)
}

/// Bucketed, resampled W2 distances of one window to the legitimate and the
/// spoofed kernel. The random stream depends only on the seed and `step`.
fn window_distances(window: &[MarketOrderMark], fit: &JointFit, cfg: &MonitorConfig, step: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(step);
    let mut order: Vec<usize> = (0..window.len()).collect();
    order.sort_by(|&a, &b| window[a].i_plus.total_cmp(&window[b].i_plus).then(a.cmp(&b)));
    let per = window.len() / cfg.buckets;
    let buckets: Vec<(f64, Vec<f64>, _)> = order
        .chunks(per)
        .map(|idx| {
            let mid = idx.iter().map(|&i| window[i].i_plus).sum::<f64>() / per as f64;
            let observed: Vec<f64> = idx.iter().map(|&i| window[i].i_minus).collect();
            (mid, observed, fit.spoofed.conditional_sampler(mid))
        })
        .collect();
    let (mut legit, mut spoof) = (0.0, 0.0);
    let mut obs = vec![0.0; per];
    let mut draw = vec![0.0; per];
    for _ in 0..cfg.repetitions {
        for (mid, observed, sampler) in &buckets {
            draw.iter_mut().for_each(|x| *x = fit.legit.sample_conditional(*mid, &mut rng));
            obs.copy_from_slice(observed);
            legit += wasserstein2_in_place(&mut obs, &mut draw).expect("finite samples");
            draw.iter_mut().for_each(|x| *x = sampler.sample(&mut rng));
            obs.copy_from_slice(observed);
            spoof += wasserstein2_in_place(&mut obs, &mut draw).expect("finite samples");
        }
    }
    let scale = (cfg.repetitions * cfg.buckets) as f64;
    (legit / scale, spoof / scale)
}

/// Maximal stretch of flagged points. `start` is the first point of the run
/// of spoof-closer windows that led to the flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagEpisode {
    pub start: i64,
    pub first_flag: i64,
    pub end: i64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub points: usize,
    pub flagged: usize,
    pub no_spoof_region: usize,
    pub mean_d_legit: f64,
    pub mean_d_spoof: f64,
    pub episodes: Vec<FlagEpisode>,
}

pub fn summarize(points: &[MonitorPoint]) -> MonitorSummary {
    let n = points.len().max(1) as f64;
    let mut episodes = Vec::new();
    let mut run_start = 0;
    for (i, p) in points.iter().enumerate() {
        if p.d_spoof > p.d_legit {
            run_start = i + 1;
        }
        if !p.flagged {
            continue;
        }
        match episodes.last_mut() {
            Some(FlagEpisode { end, points: count, .. }) if i > 0 && points[i - 1].flagged => {
                *end = p.t;
                *count += 1;
            }
            _ => episodes.push(FlagEpisode { start: points[run_start.min(i)].t, first_flag: p.t, end: p.t, points: 1 }),
        }
    }
    MonitorSummary {
        points: points.len(),
        flagged: points.iter().filter(|p| p.flagged).count(),
        no_spoof_region: points.iter().filter(|p| p.no_spoof_region).count(),
        mean_d_legit: points.iter().map(|p| p.d_legit).sum::<f64>() / n,
        mean_d_spoof: points.iter().map(|p| p.d_spoof).sum::<f64>() / n,
        episodes,
    }
}
