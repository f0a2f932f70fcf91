use serde::{Deserialize, Serialize};

use crate::imbalance::spoofed_imbalance;
use crate::numeric::golden_max;

const GRID_POINTS: usize = 2000;
const SEARCH_SPAN: f64 = 10.0;
const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    NoTrade,
    PureTaker,
    PureMaker,
    Spoof,
}

impl Regime {
    pub fn classify(h: f64, v: f64) -> Self {
        match (h > 0.0, v > 0.0) {
            (false, false) => Regime::NoTrade,
            (true, false) => Regime::PureTaker,
            (false, true) => Regime::PureMaker,
            (true, true) => Regime::Spoof,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripSolution {
    pub h_star: f64,
    pub v_star: f64,
    /// Average net revenue in tick-value units.
    pub revenue: f64,
    pub regime: Regime,
}

/// Round-trip revenue per tick for a buy of `h` shares after spoofing `v`
/// shares at depth `k`. Both unwinds are market orders; the bid side is the
/// block book implied by `ibar`.
#[allow(clippy::too_many_arguments)]
pub fn round_trip_revenue(
    ibar: f64,
    a: f64,
    mu_plus: f64,
    spread: f64,
    k: usize,
    w: f64,
    q: f64,
    h: f64,
    v: f64,
) -> f64 {
    let drift = mu_plus * (2.0 * spoofed_imbalance(ibar, a, w, v) - 1.0);
    -h * (2.0 * spread + drift) - h * h / (2.0 * a * ibar) + q * (v * (k as f64 + drift) - v * v / (2.0 * a))
}

/// Taker-only round trip (`v = 0`): the optimal buy and its revenue per tick.
pub fn taker_only(ibar: f64, a: f64, mu_plus: f64, spread: f64) -> (f64, f64) {
    let h = a * ibar * (-(2.0 * spread + mu_plus * (2.0 * ibar - 1.0))).max(0.0);
    (h, h * h / (2.0 * a * ibar))
}

/// Best `(H, v)` for the market-maker round trip. `H` is explicit given `v`;
/// `v` is searched on `[0, 10a]`.
pub fn round_trip_optimal(ibar: f64, a: f64, mu_plus: f64, spread: f64, k: usize, w: f64, q: f64) -> RoundTripSolution {
    // In units of a: u = v / a, revenue / a.
    let drift = |u: f64| mu_plus * (2.0 * spoofed_imbalance(ibar, 1.0, w, u) - 1.0);
    let taker = |u: f64| ibar * (-(2.0 * spread + drift(u))).max(0.0);
    let scaled = |u: f64| {
        let t = taker(u);
        0.5 * t * t / ibar + q * u * (k as f64 + drift(u)) - 0.5 * q * u * u
    };

    let step = SEARCH_SPAN / GRID_POINTS as f64;
    let (best_i, _) = (0..=GRID_POINTS).map(|i| (i, scaled(i as f64 * step))).fold((0, f64::NEG_INFINITY), |acc, c| {
        if c.1 > acc.1 {
            c
        } else {
            acc
        }
    });
    let lo = (best_i as f64 - 1.0).max(0.0) * step;
    let hi = ((best_i + 1) as f64 * step).min(SEARCH_SPAN);
    let (mut u, mut r) = golden_max(scaled, lo, hi, REFINE_TOL);
    let r0 = scaled(0.0);
    if r <= r0 + 1e-12 {
        u = 0.0;
        r = r0;
    }
    let h_star = a * taker(u);
    let v_star = a * u;
    RoundTripSolution { h_star, v_star, revenue: a * r, regime: Regime::classify(h_star, v_star) }
}
