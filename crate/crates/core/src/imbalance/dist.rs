use serde::{Deserialize, Serialize};

use super::ImbalanceError;

const SIMPLEX_TOL: f64 = 1e-12;

/// Non-negative weights over tick levels `0..=N`, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DepthWeights(Vec<f64>);

impl DepthWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, ImbalanceError> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ImbalanceError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(ImbalanceError::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self(weights))
    }

    /// Rescales arbitrary non-negative values onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self, ImbalanceError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(ImbalanceError::InvalidWeights("weights have no mass".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(levels: usize) -> Self {
        Self(vec![1.0 / levels as f64; levels])
    }

    /// Largest level index `N`.
    pub fn depth(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }
}

impl TryFrom<Vec<f64>> for DepthWeights {
    type Error = ImbalanceError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<DepthWeights> for Vec<f64> {
    fn from(w: DepthWeights) -> Self {
        w.0
    }
}

/// Probability distribution of integer tick moves on `-X..=X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist", into = "RawDist")]
pub struct PriceDist {
    max_move: usize,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDist {
    support: [i64; 2],
    probs: Vec<f64>,
}

impl TryFrom<RawDist> for PriceDist {
    type Error = ImbalanceError;
    fn try_from(raw: RawDist) -> Result<Self, Self::Error> {
        if raw.support[0] != -raw.support[1] || raw.support[1] < 0 {
            return Err(ImbalanceError::InvalidDist(format!("support {:?} is not symmetric", raw.support)));
        }
        let d = PriceDist::new(raw.probs)?;
        if d.max_move as i64 != raw.support[1] {
            return Err(ImbalanceError::InvalidDist("support bounds disagree with probability count".into()));
        }
        Ok(d)
    }
}

impl From<PriceDist> for RawDist {
    fn from(d: PriceDist) -> Self {
        let x = d.max_move as i64;
        RawDist { support: [-x, x], probs: d.probs }
    }
}

impl PriceDist {
    /// `probs[i]` is the probability of a move of `i - X` ticks; the length must be odd.
    pub fn new(probs: Vec<f64>) -> Result<Self, ImbalanceError> {
        if probs.len().is_multiple_of(2) {
            return Err(ImbalanceError::InvalidDist("support must be -X..=X".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ImbalanceError::InvalidDist("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(ImbalanceError::InvalidDist(format!("probabilities sum to {total}")));
        }
        Ok(Self { max_move: probs.len() / 2, probs })
    }

    /// Builds from `(move, mass)` pairs on support `-max_move..=max_move`, normalizing the masses.
    pub fn from_masses(max_move: usize, masses: &[(i64, f64)]) -> Result<Self, ImbalanceError> {
        let mut probs = vec![0.0; 2 * max_move + 1];
        for &(x, m) in masses {
            if x.unsigned_abs() as usize > max_move {
                return Err(ImbalanceError::InvalidDist(format!("move {x} outside support")));
            }
            probs[(x + max_move as i64) as usize] += m;
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return Err(ImbalanceError::InvalidDist("no mass".into()));
        }
        Self::new(probs.into_iter().map(|p| p / total).collect())
    }

    pub fn point_mass(max_move: usize, at: i64) -> Result<Self, ImbalanceError> {
        Self::from_masses(max_move, &[(at, 1.0)])
    }

    pub fn max_move(&self) -> usize {
        self.max_move
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of a move of `x` ticks (zero off the support).
    pub fn prob(&self, x: i64) -> f64 {
        let i = x + self.max_move as i64;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let x = self.max_move as i64;
        self.probs.iter().enumerate().map(move |(i, p)| (i as i64 - x, *p))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, p)| x as f64 * p).sum()
    }

    /// Mean, variance, skewness and (Pearson) kurtosis.
    pub fn moments(&self) -> (f64, f64, f64, f64) {
        let mean = self.mean();
        let central = |k: i32| self.iter().map(|(x, p)| (x as f64 - mean).powi(k) * p).sum::<f64>();
        let var = central(2);
        (mean, var, central(3) / var.powf(1.5), central(4) / (var * var))
    }

    /// The distribution of `-X` when `X` has this law.
    pub fn mirrored(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self { max_move: self.max_move, probs }
    }

    /// Pointwise mixture `t * self + (1 - t) * other` on a shared support.
    pub fn mix(&self, other: &Self, t: f64) -> Self {
        assert_eq!(self.max_move, other.max_move, "mixture needs a shared support");
        let probs = self.probs.iter().zip(&other.probs).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Self { max_move: self.max_move, probs }
    }

    /// Half-sum with the mirror image: the closest zero-mean symmetric law.
    pub fn symmetrized(&self) -> Self {
        self.mix(&self.mirrored(), 0.5)
    }

    /// Total variation distance to another law on the same support.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let x = self.max_move.max(other.max_move) as i64;
        0.5 * (-x..=x).map(|m| (self.prob(m) - other.prob(m)).abs()).sum::<f64>()
    }
}
