//! Expected cost of a spoofed buy, the no-spoofing condition, and the optimal
//! spoofing volume in a block-shaped book.

mod multi;
mod round_trip;

pub use multi::{optimal_spoof_multi, MultiConfig, MultiSolution};
pub use round_trip::{round_trip_optimal, round_trip_revenue, taker_only, Regime, RoundTripSolution};

use serde::{Deserialize, Serialize};

use crate::imbalance::{spoofed_imbalance, tail_stats, MarketModel};
use crate::numeric::bisect;

/// Default cap on spoof volume, as a multiple of the level depth `a`.
pub const DEFAULT_V_MAX_FACTOR: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam { name: &'static str, value: f64, reason: &'static str },
    #[error("depth {0} is not among the candidate depths")]
    UnknownDepth(usize),
}

/// Impact weight and execution tail of one candidate depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthTail {
    pub w: f64,
    /// Probability that a market order sweeps past the depth.
    pub q: f64,
    /// Expected overshoot in ticks past the depth.
    pub nu: f64,
}

impl DepthTail {
    /// Tail of a flat sweep law `dq_y = mass` for `y` in `k..=y_max`.
    pub fn flat(w: f64, k: usize, mass: f64, y_max: usize) -> Self {
        let n = y_max.saturating_sub(k) as f64;
        Self { w, q: mass * n, nu: mass * n * (n + 1.0) / 2.0 }
    }
}

/// Block-book spoofing problem: buy `H = rho * a` shares against ask depth `a`
/// per level with initial imbalance `ibar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofParams {
    pub ibar: f64,
    pub rho: f64,
    pub a: f64,
    pub mu_plus: f64,
    pub tick: f64,
    pub price: f64,
    pub depths: Vec<DepthTail>,
}

impl SpoofParams {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |name, value, reason| Err(OptimizerError::InvalidParam { name, value, reason });
        if !(self.ibar > 0.0 && self.ibar < 1.0) {
            return bad("ibar", self.ibar, "must lie in (0, 1)");
        }
        if !(self.rho > 0.0) {
            return bad("rho", self.rho, "must be positive");
        }
        if !(self.a > 0.0) {
            return bad("a", self.a, "must be positive");
        }
        if !(self.mu_plus > 0.0) {
            return bad("mu_plus", self.mu_plus, "must be positive");
        }
        if !(self.tick > 0.0) {
            return bad("tick", self.tick, "must be positive");
        }
        for d in &self.depths {
            if !(0.0..=1.0).contains(&d.w) {
                return bad("w", d.w, "must lie in [0, 1]");
            }
            if !(0.0..=1.0).contains(&d.q) {
                return bad("q", d.q, "must lie in [0, 1]");
            }
            if !(d.nu >= 0.0) {
                return bad("nu", d.nu, "must be non-negative");
            }
        }
        Ok(())
    }

    /// Per-depth tails from a calibrated model.
    pub fn from_model(model: &MarketModel, ibar: f64, rho: f64, a: f64, price: f64) -> Result<Self, OptimizerError> {
        let depths = (0..=model.depth())
            .map(|k| {
                let (q, nu) = tail_stats(model.dq(), k);
                DepthTail { w: model.weights().get(k), q, nu: nu.max(0.0) }
            })
            .collect();
        let p = Self { ibar, rho, a, mu_plus: model.mu_plus(), tick: model.tick_size(), price, depths };
        p.validate()?;
        Ok(p)
    }

    pub fn shares(&self) -> f64 {
        self.rho * self.a
    }

    pub fn depth(&self, k: usize) -> Result<DepthTail, OptimizerError> {
        self.depths.get(k).copied().ok_or(OptimizerError::UnknownDepth(k))
    }

    fn g(&self, x: f64) -> f64 {
        x * x / (2.0 * self.a)
    }

    /// Cost of buying immediately after the imbalance has settled, without spoofing.
    pub fn delayed_cost(&self) -> f64 {
        let h = self.shares();
        self.price * h + self.tick * (self.g(h) + h * self.mu_plus * (2.0 * self.ibar - 1.0))
    }
}

/// Average cost of buying `H` after posting `v` spoof shares at depth `k`.
pub fn expected_cost(p: &SpoofParams, k: usize, v: f64) -> Result<f64, OptimizerError> {
    let d = p.depth(k)?;
    Ok(cost_at(p, d, v))
}

fn cost_at(p: &SpoofParams, d: DepthTail, v: f64) -> f64 {
    let h = p.shares();
    let i = spoofed_imbalance(p.ibar, p.a, d.w, v);
    p.price * h + p.tick * ((1.0 - d.q) * p.g(h) + h * p.mu_plus * (2.0 * i - 1.0) + d.q * p.g(h + v) + v * d.nu)
}

/// Whether the no-spoofing verdict at `ibar` is an equivalence or only a one-way bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionRegime {
    /// `ibar <= 1/2`: spoofing exists exactly when the condition fails.
    Exact,
    /// `ibar > 1/2`: the condition rules spoofing out, its failure does not prove it.
    SufficientOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthVerdict {
    pub k: usize,
    pub admits: bool,
    /// `(2 rho mu+ (1 - ibar) ibar w - Q rho - nu) / rho`; positive iff spoofing is admitted.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofingVerdict {
    pub regime: ConditionRegime,
    pub admits: bool,
    pub depths: Vec<DepthVerdict>,
}

/// Normalized no-spoofing margin; the sign matches the failure of the
/// condition and the value is nondecreasing in `rho`.
pub fn spoofing_margin(ibar: f64, rho: f64, mu_plus: f64, d: DepthTail) -> f64 {
    2.0 * mu_plus * (1.0 - ibar) * ibar * d.w - d.q - d.nu / rho
}

pub fn admits_spoofing(p: &SpoofParams) -> SpoofingVerdict {
    let depths: Vec<DepthVerdict> = p
        .depths
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let lhs = 2.0 * p.rho * p.mu_plus * (1.0 - p.ibar) * p.ibar * d.w;
            let rhs = d.q * p.rho + d.nu;
            DepthVerdict { k, admits: lhs > rhs, margin: spoofing_margin(p.ibar, p.rho, p.mu_plus, *d) }
        })
        .collect();
    let regime = if p.ibar <= 0.5 { ConditionRegime::Exact } else { ConditionRegime::SufficientOnly };
    SpoofingVerdict { regime, admits: depths.iter().any(|d| d.admits), depths }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofSolution {
    pub k: usize,
    pub v_spoof: f64,
    pub i_spoof: f64,
    pub expected_cost: f64,
    pub admits: bool,
    /// Set when the volume hit the cap because the unconstrained optimum is unbounded or beyond it.
    pub capped: bool,
}

impl SpoofSolution {
    /// Saving relative to the delayed market order (negative means cheaper).
    pub fn cost_delta(&self, p: &SpoofParams) -> f64 {
        self.expected_cost - p.delayed_cost()
    }
}

/// Optimal single-depth spoof with the volume cap `10 a`.
pub fn optimal_spoof_at_depth(p: &SpoofParams, k: usize) -> Result<SpoofSolution, OptimizerError> {
    optimal_spoof_at_depth_capped(p, k, DEFAULT_V_MAX_FACTOR * p.a)
}

pub fn optimal_spoof_at_depth_capped(p: &SpoofParams, k: usize, v_max: f64) -> Result<SpoofSolution, OptimizerError> {
    let d = p.depth(k)?;
    let (ibar, rho, mu, w, q, nu) = (p.ibar, p.rho, p.mu_plus, d.w, d.q, d.nu);
    let lhs = 2.0 * rho * mu * (1.0 - ibar) * ibar * w;
    let admits = lhs > q * rho + nu;
    let solution = |v: f64, i: f64, capped: bool| SpoofSolution {
        k,
        v_spoof: v,
        i_spoof: i,
        expected_cost: cost_at(p, d, v),
        admits,
        capped,
    };
    if !admits {
        return Ok(solution(0.0, ibar, false));
    }
    // Volume that moves the imbalance from ibar to i.
    let volume_for = |i: f64| p.a * ibar / (w * (1.0 - ibar)) * (1.0 / i - 1.0 / ibar);
    let bracket = |i: f64| 2.0 * rho * w * mu * (1.0 - ibar) / ibar * i * i - (q * rho + nu);

    if q == 0.0 {
        if nu > 0.0 {
            let i = (nu * ibar / (2.0 * rho * mu * w * (1.0 - ibar))).sqrt();
            let v = volume_for(i);
            if v <= v_max {
                return Ok(solution(v, i, false));
            }
        }
        return Ok(solution(v_max, spoofed_imbalance(ibar, p.a, w, v_max), true));
    }

    let fixed_point = |i: f64| ibar / i - 1.0 - (1.0 - ibar) * w / q * bracket(i).max(0.0);
    let root = bisect(fixed_point, ibar * 1e-300, ibar, 1e-12).expect("fixed point brackets a root on (0, ibar]");
    let i = root.x;
    let v = p.a / q * bracket(i).max(0.0);
    Ok(solution(v, i, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked() -> SpoofParams {
        SpoofParams {
            ibar: 0.5,
            rho: 2.0,
            a: 100.0,
            mu_plus: 3.0,
            tick: 1.0,
            price: 100.0,
            depths: vec![DepthTail { w: 0.5, q: 0.05, nu: 0.05 }],
        }
    }

    /// Bisection on the reduced cubic of the worked example, written independently.
    fn cubic_root() -> f64 {
        let f = |i: f64| 60.0 * i * i * i + 0.5 * i - 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) > 0.0 {
                hi = m
            } else {
                lo = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn worked_example() {
        let p = worked();
        let s = optimal_spoof_at_depth(&p, 0).unwrap();
        let oracle = cubic_root();
        assert!((s.i_spoof - oracle).abs() < 1e-12, "{} vs {oracle}", s.i_spoof);
        assert!((s.i_spoof - 0.24457).abs() < 1e-4);
        assert!((s.v_spoof / p.a - 4.178).abs() < 1e-3, "{}", s.v_spoof / p.a);
        let v = admits_spoofing(&p);
        assert!(v.admits && v.regime == ConditionRegime::Exact);
        assert!((v.depths[0].margin * p.rho - (1.5 - 0.15)).abs() < 1e-15);
    }

    #[test]
    fn expected_cost_examples() {
        let p = SpoofParams {
            ibar: 0.5,
            rho: 1.0,
            a: 100.0,
            mu_plus: 0.4,
            tick: 1.0,
            price: 100.0,
            depths: vec![DepthTail { w: 0.2, q: 0.04, nu: 0.05 }],
        };
        let expect = 10_000.0 + 48.0 + 40.0 * (200.0 / 210.0 - 1.0) + 4.5 + 2.5;
        assert!((expected_cost(&p, 0, 50.0).unwrap() - expect).abs() < 1e-9);
        assert!((expect - 10_053.095).abs() < 1e-3);
        assert!((expected_cost(&p, 0, 0.0).unwrap() - p.delayed_cost()).abs() < 1e-12);
        let free = SpoofParams { depths: vec![DepthTail { w: 0.2, q: 0.0, nu: 0.0 }], ..p.clone() };
        assert!(expected_cost(&free, 0, 10.0).unwrap() < free.delayed_cost());
        assert!(expected_cost(&p, 3, 1.0).is_err());
    }

    #[test]
    fn no_spoof_regions() {
        let mut p = worked();
        p.depths[0].w = 0.0;
        assert!(!admits_spoofing(&p).admits);
        let s = optimal_spoof_at_depth(&p, 0).unwrap();
        assert_eq!((s.v_spoof, s.i_spoof), (0.0, p.ibar));
        let mut p = worked();
        for ibar in [1e-9, 1.0 - 1e-9] {
            p.ibar = ibar;
            assert!(!admits_spoofing(&p).admits);
        }
        p.ibar = 0.7;
        assert_eq!(admits_spoofing(&p).regime, ConditionRegime::SufficientOnly);
    }

    #[test]
    fn zero_tail_mass_is_handled() {
        let mut p = worked();
        p.depths[0] = DepthTail { w: 0.5, q: 0.0, nu: 1.0 };
        let s = optimal_spoof_at_depth(&p, 0).unwrap();
        assert!(!s.capped && s.v_spoof > 0.0);
        // the unconstrained minimizer has zero derivative
        let h = 1e-4;
        let c = |v: f64| expected_cost(&p, 0, v).unwrap();
        assert!((c(s.v_spoof + h) - c(s.v_spoof - h)).abs() / (2.0 * h) < 1e-6);
        p.depths[0].nu = 0.0;
        let s = optimal_spoof_at_depth(&p, 0).unwrap();
        assert!(s.capped && s.v_spoof == 10.0 * p.a);
    }

    #[test]
    fn flat_tail_sums() {
        let d = DepthTail::flat(0.2, 3, 0.025, 10);
        assert!((d.q - 0.175).abs() < 1e-15);
        assert!((d.nu - 0.025 * 28.0).abs() < 1e-15);
    }

    fn params() -> impl Strategy<Value = SpoofParams> {
        (0.02f64..0.98, 0.1f64..5.0, 1.0f64..1000.0, 0.1f64..5.0, 0.01f64..1.0, 0.001f64..0.5, 0.0f64..1.0).prop_map(
            |(ibar, rho, a, mu_plus, w, q, nu)| SpoofParams {
                ibar,
                rho,
                a,
                mu_plus,
                tick: 0.01,
                price: 50.0,
                depths: vec![DepthTail { w, q, nu }],
            },
        )
    }

    proptest! {
        #[test]
        fn fixed_point_forms_agree(p in params()) {
            let s = optimal_spoof_at_depth(&p, 0).unwrap();
            let d = p.depths[0];
            let lhs = 1.0 / s.i_spoof;
            let rhs = 1.0 / p.ibar + d.w * (1.0 - p.ibar) / (p.a * p.ibar) * s.v_spoof;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1.0), "{lhs} {rhs}");
            prop_assert!(s.i_spoof <= p.ibar && s.v_spoof >= 0.0);
            prop_assert_eq!(s.v_spoof == 0.0, s.i_spoof == p.ibar);
        }

        #[test]
        fn cost_is_convex(p in params(), v in 0.0f64..5.0, h in 0.01f64..2.0) {
            let c = |x: f64| expected_cost(&p, 0, x * p.a).unwrap();
            prop_assert!(c(v + h) <= 0.5 * (c(v) + c(v + 2.0 * h)) + 1e-9 * c(v).abs());
        }

        #[test]
        fn optimum_beats_its_neighbours(p in params()) {
            let s = optimal_spoof_at_depth(&p, 0).unwrap();
            let c = |v: f64| expected_cost(&p, 0, v).unwrap();
            let step = p.a * 1e-3;
            prop_assert!(s.expected_cost <= c(s.v_spoof + step) + 1e-9 * s.expected_cost.abs());
            prop_assert!(s.expected_cost <= c((s.v_spoof - step).max(0.0)) + 1e-9 * s.expected_cost.abs());
        }
    }
}
