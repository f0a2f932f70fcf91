//! Weighted multilevel imbalance and the imbalance-driven price-move laws.

mod dist;
mod model;

pub use dist::{DepthWeights, PriceDist};
pub use model::{MarketModel, DEFAULT_NU_TOLERANCE};

use crate::lob::{BookSnapshot, BookTimeline};

#[derive(Debug, thiserror::Error)]
pub enum ImbalanceError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid distribution: {0}")]
    InvalidDist(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("weighted bid and ask mass are both zero")]
    EmptyBook,
    #[error("no book state covers the window")]
    EmptyWindow,
    #[error("book depth {book} is shallower than weight depth {weights}")]
    DepthMismatch { book: usize, weights: usize },
}

/// `<w, bid> / (<w, bid> + <w, ask>)` over levels `0..=N`.
pub fn weighted_imbalance(snap: &BookSnapshot, w: &DepthWeights) -> Result<f64, ImbalanceError> {
    if snap.depth() < w.depth() {
        return Err(ImbalanceError::DepthMismatch { book: snap.depth(), weights: w.depth() });
    }
    let dot = |v: &[u64]| w.as_slice().iter().zip(v).map(|(wk, vk)| wk * *vk as f64).sum::<f64>();
    ratio(dot(&snap.bid), dot(&snap.ask))
}

fn ratio(bid: f64, ask: f64) -> Result<f64, ImbalanceError> {
    if !(bid + ask > 0.0) {
        return Err(ImbalanceError::EmptyBook);
    }
    Ok(bid / (bid + ask))
}

/// Time-weighted imbalance over `[t0, t1)`: weighted bid mass integrated over
/// the window divided by the integrated weighted total mass.
pub fn time_avg_imbalance(timeline: &BookTimeline, t0: i64, t1: i64, w: &DepthWeights) -> Result<f64, ImbalanceError> {
    if timeline.depth() < w.depth() {
        return Err(ImbalanceError::DepthMismatch { book: timeline.depth(), weights: w.depth() });
    }
    let (bid, ask, covered) = timeline.window_integrals(t0, t1);
    if covered <= 0.0 {
        return Err(ImbalanceError::EmptyWindow);
    }
    let dot = |v: &[f64]| w.as_slice().iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    ratio(dot(&bid), dot(&ask))
}

/// Imbalance of a block book with ask depth `a` and initial imbalance `ibar`
/// after adding `v` shares at a level of weight `w_k`.
pub fn spoofed_imbalance(ibar: f64, a: f64, w_k: f64, v: f64) -> f64 {
    let b = a * ibar / (1.0 - ibar);
    b / (a + b + w_k * v)
}

/// `i * dp+ + (1 - i) * dp-`.
pub fn dp_of_imbalance(model: &MarketModel, i: f64) -> PriceDist {
    model.dp_plus().mix(model.dp_minus(), i)
}

/// Tail mass `Q_k = sum_{y > k} dq_y` and tail excess `nu_k = sum_{y > k} (y - k) dq_y`.
pub fn tail_stats(dq: &PriceDist, k: usize) -> (f64, f64) {
    dq.iter().filter(|(y, _)| *y > k as i64).fold((0.0, 0.0), |(q, nu), (y, p)| (q + p, nu + (y - k as i64) as f64 * p))
}
