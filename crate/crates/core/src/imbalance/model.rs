use serde::{Deserialize, Serialize};

use super::dist::{DepthWeights, PriceDist};
use super::ImbalanceError;

/// Largest tolerated |mean| of the market-order move law.
pub const DEFAULT_NU_TOLERANCE: f64 = 1e-9;
const MEAN_TOL: f64 = 1e-12;

/// Calibrated price-impact model: depth weights, the extreme limit-order move
/// law `dp+` (its mirror `dp-` is derived, never stored), the market-order
/// sweep law `dq`, and the tick size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MarketModel {
    weights: DepthWeights,
    dp_plus: PriceDist,
    dp_minus: PriceDist,
    dq: PriceDist,
    mu_plus: f64,
    tick_size: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    tick_size: f64,
    weights: DepthWeights,
    dp_plus: PriceDist,
    dq: PriceDist,
    mu_plus: f64,
}

impl TryFrom<RawModel> for MarketModel {
    type Error = ImbalanceError;
    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        let computed = raw.dp_plus.mean();
        if (computed - raw.mu_plus).abs() > MEAN_TOL {
            return Err(ImbalanceError::InvalidModel(format!(
                "mu_plus {} disagrees with mean of dp_plus {computed}",
                raw.mu_plus
            )));
        }
        let mut m = MarketModel::new(raw.weights, raw.dp_plus, raw.dq, raw.tick_size)?;
        m.mu_plus = raw.mu_plus;
        Ok(m)
    }
}

impl From<MarketModel> for RawModel {
    fn from(m: MarketModel) -> Self {
        RawModel { tick_size: m.tick_size, weights: m.weights, dp_plus: m.dp_plus, dq: m.dq, mu_plus: m.mu_plus }
    }
}

impl MarketModel {
    pub fn new(
        weights: DepthWeights,
        dp_plus: PriceDist,
        dq: PriceDist,
        tick_size: f64,
    ) -> Result<Self, ImbalanceError> {
        Self::with_nu_tolerance(weights, dp_plus, dq, tick_size, DEFAULT_NU_TOLERANCE)
    }

    pub fn with_nu_tolerance(
        weights: DepthWeights,
        dp_plus: PriceDist,
        dq: PriceDist,
        tick_size: f64,
        nu_tolerance: f64,
    ) -> Result<Self, ImbalanceError> {
        if !(tick_size > 0.0) {
            return Err(ImbalanceError::InvalidModel("tick size must be positive".into()));
        }
        for x in 1..=dp_plus.max_move() as i64 {
            if dp_plus.prob(x) + MEAN_TOL < dp_plus.prob(-x) {
                return Err(ImbalanceError::InvalidModel(format!("dp_plus is not right-skewed at move {x}")));
            }
        }
        let mu_plus = dp_plus.mean();
        if !(mu_plus > 0.0) {
            return Err(ImbalanceError::InvalidModel(format!("mu_plus = {mu_plus} must be positive")));
        }
        let nu = dq.mean();
        if nu.abs() > nu_tolerance {
            return Err(ImbalanceError::InvalidModel(format!("dq has nonzero mean {nu}")));
        }
        let dp_minus = dp_plus.mirrored();
        Ok(Self { weights, dp_plus, dp_minus, dq, mu_plus, tick_size })
    }

    pub fn weights(&self) -> &DepthWeights {
        &self.weights
    }

    pub fn dp_plus(&self) -> &PriceDist {
        &self.dp_plus
    }

    pub fn dp_minus(&self) -> &PriceDist {
        &self.dp_minus
    }

    pub fn dq(&self) -> &PriceDist {
        &self.dq
    }

    pub fn mu_plus(&self) -> f64 {
        self.mu_plus
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn depth(&self) -> usize {
        self.weights.depth()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ImbalanceError> {
        serde_json::from_str(text).map_err(|e| ImbalanceError::InvalidModel(e.to_string()))
    }
}
