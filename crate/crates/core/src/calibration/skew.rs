use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::numeric::{moments, nelder_mead, norm_log_cdf, norm_log_pdf, NelderMeadConfig};

pub const MIN_SKEW_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalParams {
    pub alpha: f64,
    pub xi: f64,
    pub omega: f64,
}

impl SkewNormalParams {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.xi) / self.omega;
        std::f64::consts::LN_2 - self.omega.ln() + norm_log_pdf(z) + norm_log_cdf(self.alpha * z)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn delta(&self) -> f64 {
        self.alpha / (1.0 + self.alpha * self.alpha).sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.xi + self.omega * self.delta() * (2.0 / std::f64::consts::PI).sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let bd = self.delta() * (2.0 / std::f64::consts::PI).sqrt();
        0.5 * (4.0 - std::f64::consts::PI) * bd.powi(3) / (1.0 - bd * bd).powf(1.5)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let d = self.delta();
        let u0: f64 = rng.sample(StandardNormal);
        let u1: f64 = rng.sample(StandardNormal);
        self.xi + self.omega * (d * u0.abs() + (1.0 - d * d).sqrt() * u1)
    }

    /// Method-of-moments starting point with the skewness clipped into the admissible range.
    pub fn from_moments(mean: f64, var: f64, skew: f64) -> Self {
        let b = (2.0 / std::f64::consts::PI).sqrt();
        let g = skew.clamp(-0.99, 0.99);
        let r = (2.0 * g.abs() / (4.0 - std::f64::consts::PI)).cbrt();
        let bd = (r * r / (1.0 + r * r)).sqrt();
        let delta = (g.signum() * bd / b).clamp(-0.995, 0.995);
        let omega = (var / (1.0 - b * b * delta * delta)).sqrt();
        Self { alpha: delta / (1.0 - delta * delta).sqrt(), xi: mean - omega * b * delta, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalFit {
    pub params: SkewNormalParams,
    /// Mean log-likelihood per sample.
    pub log_likelihood: f64,
}

fn mean_log_lik(samples: &[f64], p: &SkewNormalParams) -> f64 {
    samples.iter().map(|&x| p.log_pdf(x)).sum::<f64>() / samples.len() as f64
}

/// Maximum-likelihood skew-normal fit, started from the moment estimate and
/// from the symmetric normal; the better local optimum wins.
pub fn fit_skewnormal(samples: &[f64]) -> Result<SkewNormalFit, CalibrationError> {
    if samples.len() < MIN_SKEW_SAMPLES {
        return Err(CalibrationError::InsufficientSamples {
            what: "skew-normal fit",
            got: samples.len(),
            need: MIN_SKEW_SAMPLES,
        });
    }
    let (mean, var, skew, _) = moments(samples);
    if !(var > 1e-300) || !var.is_finite() {
        return Err(CalibrationError::Degenerate("imbalance sample has no spread"));
    }
    let unpack = |x: &[f64]| SkewNormalParams { alpha: x[0], xi: x[1], omega: x[2].exp() };
    let objective = |x: &[f64]| -mean_log_lik(samples, &unpack(x));
    let sd = var.sqrt();
    let mom = SkewNormalParams::from_moments(mean, var, skew);
    let cfg = NelderMeadConfig { ftol: 1e-13, initial_step: 0.3, ..Default::default() };
    let mut best: Option<(SkewNormalParams, f64, bool)> = None;
    for start in [[mom.alpha, mom.xi, mom.omega.ln()], [0.0, mean, sd.ln()]] {
        // work in standardized coordinates so the simplex step is scale-free
        let to_std = |x: &[f64]| vec![x[0], (x[1] - mean) / sd, x[2] - sd.ln()];
        let from_std = |y: &[f64]| vec![y[0], mean + sd * y[1], y[2] + sd.ln()];
        let m = nelder_mead(|y| objective(&from_std(y)), &to_std(&start), &cfg);
        let p = unpack(&from_std(&m.x));
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((p, m.value, m.converged));
        }
    }
    let (params, value, converged) = best.expect("at least one start");
    if !converged || !value.is_finite() {
        return Err(CalibrationError::NonConvergence("skew-normal likelihood"));
    }
    Ok(SkewNormalFit { params, log_likelihood: -value })
}
