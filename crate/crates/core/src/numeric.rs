//! Small numerical toolbox shared by the optimizer, calibration and detector:
//! standard normal functions, bracketing root search, golden-section search
//! and a Nelder–Mead simplex minimizer.

use libm::erfc;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn norm_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Φ(x)` without underflow for very negative `x`.
pub fn norm_log_cdf(x: f64) -> f64 {
    if x > -37.0 {
        norm_cdf(x).ln()
    } else {
        // Asymptotic series of the Mills ratio; at |x| >= 37 the terms past
        // (2n-1)!!/x^2n with n = 7 are below 1e-17.
        let z2 = x * x;
        let (mut term, mut series) = (1.0, 1.0);
        for n in 1..=7 {
            term *= -(2 * n - 1) as f64 / z2;
            series += term;
        }
        norm_log_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Result of a bracketing search.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]` for a function with a sign change.
///
/// Iterates until the bracket collapses to adjacent floats or the residual
/// drops below `ftol`, then returns whichever endpoint has the smaller
/// residual. Returns `None` when the endpoints do not bracket a root.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, ftol: f64) -> Option<Root>
where
    F: Fn(f64) -> f64,
{
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Some(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if fhi == 0.0 {
        return Some(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let mut iterations = 0;
    while iterations < 2000 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(Root { x: mid, residual: 0.0, iterations });
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if flo.abs().min(fhi.abs()) <= ftol && hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let (x, residual) = if flo.abs() <= fhi.abs() { (lo, flo) } else { (hi, fhi) };
    Some(Root { x, residual, iterations })
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`, stopping when the
/// bracket is narrower than `xtol`.
pub fn golden_max<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    [(x1, f1), (x2, f2), (x, fx)].into_iter().fold((x, fx), |best, cand| if cand.1 > best.1 { cand } else { best })
}

#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the spread of objective values across the simplex falls below this.
    pub ftol: f64,
    pub initial_step: f64,
    /// Number of times the simplex is rebuilt around the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 20_000, ftol: 1e-10, initial_step: 0.5, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Unconstrained Nelder–Mead minimization with standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
pub fn nelder_mead<F>(f: F, x0: &[f64], cfg: &NelderMeadConfig) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n = x0.len();
    let mut evals = 0usize;
    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0);
    evals += 1;
    let mut converged = false;

    for _round in 0..=cfg.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best_v));
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += cfg.initial_step;
            let v = eval(&x);
            evals += 1;
            simplex.push((x, v));
        }
        let start_best = best_v;
        converged = false;
        while evals < cfg.max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            if spread.abs() <= cfg.ftol * (1.0 + simplex[0].1.abs()) {
                converged = true;
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along =
                |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(1.0);
            let vr = eval(&xr);
            evals += 1;
            if vr < simplex[0].1 {
                let xe = along(2.0);
                let ve = eval(&xe);
                evals += 1;
                simplex[n] = if ve < vr { (xe, ve) } else { (xr, vr) };
            } else if vr < simplex[n - 1].1 {
                simplex[n] = (xr, vr);
            } else {
                let (xc, vc) = if vr < simplex[n].1 {
                    let xc = along(0.5);
                    let vc = eval(&xc);
                    (xc, vc)
                } else {
                    let xc = along(-0.5);
                    let vc = eval(&xc);
                    (xc, vc)
                };
                evals += 1;
                if vc < simplex[n].1.min(vr) {
                    simplex[n] = (xc, vc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for (x, v) in simplex.iter_mut().skip(1) {
                        for (xi, bi) in x.iter_mut().zip(&x0) {
                            *xi = bi + 0.5 * (*xi - bi);
                        }
                        *v = eval(x);
                    }
                    evals += n;
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_v {
            best_v = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if evals >= cfg.max_evals || start_best - best_v <= cfg.ftol * (1.0 + best_v.abs()) {
            break;
        }
    }
    Minimum { x: best_x, value: best_v, evals, converged }
}

/// Maps unconstrained logits to a point of the probability simplex. The last
/// coordinate is pinned to logit 0, so `logits.len() + 1` weights come back.
pub fn softmax_pinned(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(0.0f64, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    out.push((-max).exp());
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Inverse of [`softmax_pinned`] for strictly positive weights.
pub fn logits_pinned(weights: &[f64]) -> Vec<f64> {
    let floor = 1e-12;
    let last = weights[weights.len() - 1].max(floor);
    weights[..weights.len() - 1].iter().map(|w| (w.max(floor) / last).ln()).collect()
}

/// Sample moments: mean, variance (population), skewness and Pearson kurtosis.
pub fn moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2))
}

/// Empirical quantile by the inverse-CDF rule on sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}
