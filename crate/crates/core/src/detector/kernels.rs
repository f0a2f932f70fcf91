use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DetectorError;
use crate::calibration::fit_skewnormal;
use crate::numeric::{moments, nelder_mead, norm_log_cdf, norm_log_pdf, NelderMeadConfig};

/// Points on the inverse-CDF grid of a skew-normal conditional.
pub const SAMPLER_GRID: usize = 2048;

/// Bivariate normal with correlation `r`. Coordinate 1 is the pre-order
/// imbalance, coordinate 2 the post-order imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateNormal {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub r: f64,
}

impl BivariateNormal {
    /// Maximum-likelihood fit. For the Gaussian family the likelihood is
    /// maximised by the population moments, so no search is needed.
    pub fn fit(x1: &[f64], x2: &[f64]) -> Result<Self, DetectorError> {
        if x1.is_empty() || x1.len() != x2.len() {
            return Err(DetectorError::EmptySample);
        }
        let (m1, v1, _, _) = moments(x1);
        let (m2, v2, _, _) = moments(x2);
        let n = x1.len() as f64;
        let cov = x1.iter().zip(x2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / n;
        if !(v1 > 0.0 && v2 > 0.0) {
            return Err(DetectorError::SingularCovariance);
        }
        let r = cov / (v1 * v2).sqrt();
        if !(r.abs() < 1.0 - 1e-12) {
            return Err(DetectorError::SingularCovariance);
        }
        Ok(Self { mu: [m1, m2], sigma: [v1.sqrt(), v2.sqrt()], r })
    }

    pub fn log_pdf(&self, x1: f64, x2: f64) -> f64 {
        let z1 = (x1 - self.mu[0]) / self.sigma[0];
        let z2 = (x2 - self.mu[1]) / self.sigma[1];
        let one_r2 = 1.0 - self.r * self.r;
        -(z1 * z1 - 2.0 * self.r * z1 * z2 + z2 * z2) / (2.0 * one_r2)
            - (2.0 * std::f64::consts::PI * self.sigma[0] * self.sigma[1] * one_r2.sqrt()).ln()
    }

    /// Mean and standard deviation of coordinate 1 given coordinate 2 = `y`.
    pub fn conditional(&self, y: f64) -> (f64, f64) {
        let mean = self.mu[0] + self.sigma[0] / self.sigma[1] * self.r * (y - self.mu[1]);
        (mean, self.sigma[0] * (1.0 - self.r * self.r).sqrt())
    }

    pub fn conditional_pdf(&self, y: f64, x: f64) -> f64 {
        let (m, s) = self.conditional(y);
        norm_log_pdf((x - m) / s).exp() / s
    }

    pub fn sample_conditional<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> f64 {
        let (m, s) = self.conditional(y);
        m + s * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Azzalini bivariate skew-normal, `2 phi_2(x - xi; Omega) Phi(alpha' D^-1 (x - xi))`
/// with `D = diag(sqrt(omega_11), sqrt(omega_22))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateSkewNormal {
    pub alpha: [f64; 2],
    pub xi: [f64; 2],
    pub omega: [[f64; 2]; 2],
}

/// Precomputed pieces of the conditional law of coordinate 1 given coordinate 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewConditional {
    /// Location `xi_1 + omega_12 / omega_22 (y - xi_2)`.
    pub location: f64,
    /// Standard deviation of the Gaussian core, `sqrt(omega_11.2)`.
    pub scale: f64,
    /// Slope `alpha_1 / sqrt(omega_11)` of the skewing argument.
    pub slope: f64,
    /// Extension parameter `x0'`.
    pub shift: f64,
    /// `ln Phi(x0)`.
    pub log_norm: f64,
}

impl SkewConditional {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let u = x - self.location;
        norm_log_pdf(u / self.scale) - self.scale.ln() + norm_log_cdf(self.slope * u + self.shift) - self.log_norm
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }
}

impl BivariateSkewNormal {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let [[a, b], [c, d]] = self.omega;
        let finite = self.alpha.iter().chain(&self.xi).chain(&[a, b, c, d]).all(|v| v.is_finite());
        if !finite || b != c || !(a > 0.0 && d > 0.0 && a * d - b * c > 0.0) {
            return Err(DetectorError::SingularCovariance);
        }
        Ok(())
    }

    /// Correlation of the Gaussian core.
    pub fn core_correlation(&self) -> f64 {
        self.omega[0][1] / (self.omega[0][0] * self.omega[1][1]).sqrt()
    }

    pub fn log_pdf(&self, x1: f64, x2: f64) -> f64 {
        let s1 = self.omega[0][0].sqrt();
        let s2 = self.omega[1][1].sqrt();
        let r = self.core_correlation();
        let z1 = (x1 - self.xi[0]) / s1;
        let z2 = (x2 - self.xi[1]) / s2;
        let one_r2 = 1.0 - r * r;
        std::f64::consts::LN_2
            - (z1 * z1 - 2.0 * r * z1 * z2 + z2 * z2) / (2.0 * one_r2)
            - (2.0 * std::f64::consts::PI * s1 * s2 * one_r2.sqrt()).ln()
            + norm_log_cdf(self.alpha[0] * z1 + self.alpha[1] * z2)
    }

    /// Conditional law of coordinate 1 given coordinate 2 = `y`: an extended
    /// skew-normal with density
    /// `phi((x - loc)/s)/s * Phi(alpha_1 (x - loc)/sqrt(omega_11) + x0') / Phi(x0)`.
    pub fn conditional(&self, y: f64) -> SkewConditional {
        let [[w1, w], [_, w2]] = self.omega;
        let r = self.core_correlation();
        let location = self.xi[0] + w / w2 * (y - self.xi[1]);
        let w11_2 = w1 - w * w / w2;
        let a1 = self.alpha[0];
        let stretch = (1.0 + a1 * a1 * w11_2 / w1).sqrt();
        let alpha2_bar = (self.alpha[1] + r * a1) / stretch;
        let x0 = alpha2_bar * (y - self.xi[1]) / w2.sqrt();
        SkewConditional {
            location,
            scale: w11_2.sqrt(),
            slope: a1 / w1.sqrt(),
            shift: stretch * x0,
            log_norm: norm_log_cdf(x0),
        }
    }

    pub fn conditional_pdf(&self, y: f64, x: f64) -> f64 {
        self.conditional(y).pdf(x)
    }

    /// Inverse-CDF sampler for the conditional law at `y`.
    pub fn conditional_sampler(&self, y: f64) -> GridSampler {
        GridSampler::new(&self.conditional(y))
    }

    /// Maximum-likelihood fit in standardized coordinates, from a symmetric
    /// start and from a start built out of the two marginal skew-normal fits.
    pub fn fit(x1: &[f64], x2: &[f64]) -> Result<Self, DetectorError> {
        if x1.is_empty() || x1.len() != x2.len() {
            return Err(DetectorError::EmptySample);
        }
        let gauss = BivariateNormal::fit(x1, x2)?;
        let [m1, m2] = gauss.mu;
        let [s1, s2] = gauss.sigma;
        let u1: Vec<f64> = x1.iter().map(|v| (v - m1) / s1).collect();
        let u2: Vec<f64> = x2.iter().map(|v| (v - m2) / s2).collect();
        let n = u1.len() as f64;
        let unpack = |p: &[f64]| {
            let (a, d) = (p[4].exp(), p[5].exp());
            let r = p[6].tanh();
            BivariateSkewNormal {
                alpha: [p[0], p[1]],
                xi: [p[2], p[3]],
                omega: [[a * a, r * a * d], [r * a * d, d * d]],
            }
        };
        let objective = |p: &[f64]| {
            let sn = unpack(p);
            -u1.iter().zip(&u2).map(|(a, b)| sn.log_pdf(*a, *b)).sum::<f64>() / n
        };
        let mut starts = vec![vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, gauss.r.atanh()]];
        if let (Ok(f1), Ok(f2)) = (fit_skewnormal(&u1), fit_skewnormal(&u2)) {
            let (p1, p2) = (f1.params, f2.params);
            starts.push(vec![p1.alpha, p2.alpha, p1.xi, p2.xi, p1.omega.ln(), p2.omega.ln(), gauss.r.atanh()]);
        }
        let cfg = NelderMeadConfig { ftol: 1e-12, initial_step: 0.3, max_evals: 40_000, restarts: 3 };
        let best = starts
            .iter()
            .map(|s| nelder_mead(objective, s, &cfg))
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("at least one start");
        if !best.converged || !best.value.is_finite() {
            return Err(DetectorError::NonConvergence("bivariate skew-normal likelihood"));
        }
        let std = unpack(&best.x);
        let fit = BivariateSkewNormal {
            alpha: std.alpha,
            xi: [m1 + s1 * std.xi[0], m2 + s2 * std.xi[1]],
            omega: [
                [s1 * s1 * std.omega[0][0], s1 * s2 * std.omega[0][1]],
                [s1 * s2 * std.omega[1][0], s2 * s2 * std.omega[1][1]],
            ],
        };
        fit.validate()?;
        Ok(fit)
    }
}

/// Piecewise-linear inverse CDF of a density tabulated on [`SAMPLER_GRID`]
/// points spanning the region where the log-density is within 40 of its peak.
#[derive(Debug, Clone)]
pub struct GridSampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridSampler {
    pub fn new(k: &SkewConditional) -> Self {
        // coarse scan to locate the bulk; the skewing factor can push it far
        // from the Gaussian core's location when x0' is very negative
        let reach = 40.0 * k.scale;
        let coarse = 801;
        let (lo0, hi0) = (k.location - reach, k.location + reach);
        let step = (hi0 - lo0) / (coarse - 1) as f64;
        let logs: Vec<f64> = (0..coarse).map(|i| k.log_pdf(lo0 + i as f64 * step)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = logs.iter().position(|&l| l > peak - 40.0).unwrap_or(0);
        let last = logs.iter().rposition(|&l| l > peak - 40.0).unwrap_or(coarse - 1);
        let lo = lo0 + first.saturating_sub(1) as f64 * step;
        let hi = lo0 + (last + 1).min(coarse - 1) as f64 * step;
        let h = (hi - lo) / (SAMPLER_GRID - 1) as f64;
        let xs: Vec<f64> = (0..SAMPLER_GRID).map(|i| lo + i as f64 * h).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| (k.log_pdf(x) - peak).exp()).collect();
        let mut cdf = Vec::with_capacity(SAMPLER_GRID);
        cdf.push(0.0);
        for i in 1..SAMPLER_GRID {
            cdf.push(cdf[i - 1] + 0.5 * h * (pdf[i] + pdf[i - 1]));
        }
        let total = cdf[SAMPLER_GRID - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        Self { xs, cdf }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, self.xs.len() - 1);
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let t = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        self.xs[j - 1] + t * (self.xs[j] - self.xs[j - 1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Sup-norm gap between a closed-form conditional and the numerically
    /// normalized slice of the joint density on a fine grid.
    fn slice_gap(joint: impl Fn(f64) -> f64, closed: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let n = 200_001;
        let h = (hi - lo) / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| joint(lo + i as f64 * h)).collect();
        let z: f64 = h * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n - 1]));
        (0..1000)
            .map(|i| {
                let j = i * (n - 1) / 999;
                (vals[j] / z - closed(lo + j as f64 * h)).abs()
            })
            .fold(0.0, f64::max)
    }

    fn sn() -> BivariateSkewNormal {
        BivariateSkewNormal { alpha: [2.5, -1.5], xi: [0.4, 0.5], omega: [[0.01, 0.004], [0.004, 0.0064]] }
    }

    #[test]
    fn normal_conditional_matches_slice() {
        let g = BivariateNormal { mu: [0.45, 0.5], sigma: [0.08, 0.06], r: 0.6 };
        for y in [0.35, 0.5, 0.62] {
            let (m, s) = g.conditional(y);
            let gap = slice_gap(|x| g.log_pdf(x, y).exp(), |x| g.conditional_pdf(y, x), m - 12.0 * s, m + 12.0 * s);
            assert!(gap < 1e-6, "{gap}");
        }
    }

    #[test]
    fn skew_conditional_matches_slice() {
        let p = sn();
        for y in [0.3, 0.5, 0.7] {
            let c = p.conditional(y);
            let (lo, hi) = (c.location - 12.0 * c.scale, c.location + 12.0 * c.scale);
            let gap = slice_gap(|x| p.log_pdf(x, y).exp(), |x| c.pdf(x), lo, hi);
            assert!(gap < 1e-6, "y={y}: {gap}");
        }
    }

    #[test]
    fn zero_skew_reduces_to_gaussian_core() {
        let mut p = sn();
        p.alpha = [0.0, 0.0];
        let r = p.core_correlation();
        let g = BivariateNormal { mu: p.xi, sigma: [p.omega[0][0].sqrt(), p.omega[1][1].sqrt()], r };
        for y in [0.2, 0.5, 0.9] {
            for x in [0.1, 0.4, 0.55, 0.8] {
                let (a, b) = (p.conditional_pdf(y, x), g.conditional_pdf(y, x));
                assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn uncorrelated_normal_conditional_is_the_marginal() {
        let g = BivariateNormal { mu: [0.45, 0.5], sigma: [0.08, 0.06], r: 0.0 };
        for y in [0.1, 0.5, 0.9] {
            for x in [0.3, 0.45, 0.6] {
                let marginal = norm_log_pdf((x - 0.45) / 0.08).exp() / 0.08;
                assert!((g.conditional_pdf(y, x) - marginal).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sampler_reproduces_conditional_moments() {
        let p = sn();
        let c = p.conditional(0.55);
        let s = GridSampler::new(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| s.sample(&mut rng)).collect();
        let h = 1e-5;
        let (lo, hi) = (c.location - 12.0 * c.scale, c.location + 12.0 * c.scale);
        let grid = ((hi - lo) / h) as usize;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..grid {
            let x = lo + (i as f64 + 0.5) * h;
            let d = c.pdf(x) * h;
            m0 += d;
            m1 += d * x;
            m2 += d * x * x;
        }
        assert!((m0 - 1.0).abs() < 1e-6);
        let sd = (m2 - m1 * m1).sqrt();
        let (mean, var, _, _) = moments(&xs);
        assert!((mean - m1).abs() < 3.0 * sd / (xs.len() as f64).sqrt(), "{mean} vs {m1}");
        assert!((var.sqrt() / sd - 1.0).abs() < 0.01);
    }

    #[test]
    fn normal_sampling_matches_closed_form() {
        let g = BivariateNormal { mu: [0.45, 0.5], sigma: [0.08, 0.06], r: -0.4 };
        let (m, s) = g.conditional(0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..100_000).map(|_| g.sample_conditional(0.6, &mut rng)).collect();
        let (mean, var, _, _) = moments(&xs);
        let n = xs.len() as f64;
        assert!((mean - m).abs() < 3.0 * s / n.sqrt());
        // the standard error of a sample variance is about var * sqrt(2/n)
        assert!((var - s * s).abs() < 3.0 * s * s * (2.0 / n).sqrt());
    }

    #[test]
    fn skew_normal_fit_recovers_parameters() {
        let truth = sn();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Azzalini's stochastic representation through a trivariate normal
        let (s1, s2, r) = (truth.omega[0][0].sqrt(), truth.omega[1][1].sqrt(), truth.core_correlation());
        let corr = [[1.0, r], [r, 1.0]];
        let oa = [
            corr[0][0] * truth.alpha[0] + corr[0][1] * truth.alpha[1],
            corr[1][0] * truth.alpha[0] + corr[1][1] * truth.alpha[1],
        ];
        let q = (1.0 + truth.alpha[0] * oa[0] + truth.alpha[1] * oa[1]).sqrt();
        let delta = [oa[0] / q, oa[1] / q];
        let (mut x1, mut x2) = (Vec::new(), Vec::new());
        for _ in 0..20_000 {
            let u0: f64 = rng.sample::<f64, _>(StandardNormal).abs();
            // residual covariance corr - delta delta'
            let c11 = 1.0 - delta[0] * delta[0];
            let c12 = r - delta[0] * delta[1];
            let c22 = 1.0 - delta[1] * delta[1];
            let l11 = c11.sqrt();
            let l21 = c12 / l11;
            let l22 = (c22 - l21 * l21).sqrt();
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let z1 = delta[0] * u0 + l11 * e1;
            let z2 = delta[1] * u0 + l21 * e1 + l22 * e2;
            x1.push(truth.xi[0] + s1 * z1);
            x2.push(truth.xi[1] + s2 * z2);
        }
        let fit = BivariateSkewNormal::fit(&x1, &x2).unwrap();
        for (a, b) in fit.alpha.iter().zip(truth.alpha) {
            assert!((a - b).abs() < 0.5, "{fit:?}");
        }
        assert!((fit.core_correlation() - r).abs() < 0.1, "{fit:?}");
        assert!((fit.omega[0][0] / truth.omega[0][0] - 1.0).abs() < 0.15, "{fit:?}");
    }
}
