use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{optimal_spoof_at_depth_capped, SpoofParams, SpoofSolution, DEFAULT_V_MAX_FACTOR};
use crate::numeric::bisect;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiConfig {
    pub max_sweeps: usize,
    /// Sweeps stop once no coordinate moves by more than `tol * a`.
    pub tol: f64,
    pub v_max_factor: f64,
}

impl Default for MultiConfig {
    fn default() -> Self {
        Self { max_sweeps: 10_000, tol: 1e-12, v_max_factor: DEFAULT_V_MAX_FACTOR }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiSolution {
    pub volumes: Vec<f64>,
    pub i_spoof: f64,
    pub expected_cost: f64,
    pub per_depth: Vec<SpoofSolution>,
    /// Depth of the cheapest single-depth spoof.
    pub best_single: usize,
    pub converged: bool,
    pub sweeps: usize,
}

/// Cost of spoofing `volumes[k]` at every depth at once. Each depth executes
/// independently against the sweep law; all depths share one imbalance.
pub fn multi_cost(p: &SpoofParams, volumes: &[f64]) -> f64 {
    let h = p.shares();
    let g = |x: f64| x * x / (2.0 * p.a);
    let b = p.a * p.ibar / (1.0 - p.ibar);
    let s: f64 = p.depths.iter().zip(volumes).map(|(d, v)| d.w * v).sum();
    let i = b / (p.a + b + s);
    let exec: f64 = p.depths.iter().zip(volumes).map(|(d, &v)| d.q * (g(h + v) - g(h)) + d.nu * v).sum();
    p.price * h + p.tick * (g(h) + h * p.mu_plus * (2.0 * i - 1.0) + exec)
}

/// Jointly optimal spoof volumes over all candidate depths by projected
/// coordinate descent, started from the best single-depth solution.
pub fn optimal_spoof_multi(p: &SpoofParams, cfg: &MultiConfig) -> MultiSolution {
    let v_max = cfg.v_max_factor * p.a;
    let per_depth: Vec<SpoofSolution> =
        (0..p.depths.len()).map(|k| optimal_spoof_at_depth_capped(p, k, v_max).expect("depth in range")).collect();
    let best_single = per_depth
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.expected_cost.total_cmp(&y.1.expected_cost))
        .map(|(k, _)| k)
        .unwrap_or(0);

    let mut v = vec![0.0; p.depths.len()];
    if let Some(s) = per_depth.get(best_single) {
        v[best_single] = s.v_spoof;
    }
    let start = v.clone();

    let h = p.shares();
    let b = p.a * p.ibar / (1.0 - p.ibar);
    let push = 2.0 * h * p.mu_plus * b;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut moved = 0.0f64;
        for k in 0..v.len() {
            let d = p.depths[k];
            let others: f64 =
                p.depths.iter().zip(&v).enumerate().filter(|(j, _)| *j != k).map(|(_, (dj, vj))| dj.w * vj).sum();
            let base = p.a + b + others;
            let grad = |x: f64| -push * d.w / (base + d.w * x).powi(2) + d.q * (h + x) / p.a + d.nu;
            let next = if d.w == 0.0 || grad(0.0) >= 0.0 {
                0.0
            } else if d.q == 0.0 {
                if d.nu > 0.0 {
                    (((push * d.w / d.nu).sqrt() - base) / d.w).min(v_max)
                } else {
                    v_max
                }
            } else {
                let hi = (p.a / d.q * push * d.w / base.powi(2)).min(v_max);
                if grad(hi) <= 0.0 {
                    hi
                } else {
                    bisect(grad, 0.0, hi, 0.0).map(|r| r.x).unwrap_or(0.0)
                }
            };
            moved = moved.max((next - v[k]).abs());
            v[k] = next;
        }
        if moved <= cfg.tol * p.a {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(sweeps, "multi-depth coordinate descent hit the sweep cap");
    }
    let mut cost = multi_cost(p, &v);
    let start_cost = multi_cost(p, &start);
    if cost > start_cost {
        v = start;
        cost = start_cost;
    }
    let s: f64 = p.depths.iter().zip(&v).map(|(d, x)| d.w * x).sum();
    MultiSolution {
        i_spoof: b / (p.a + b + s),
        volumes: v,
        expected_cost: cost,
        per_depth,
        best_single,
        converged,
        sweeps,
    }
}
