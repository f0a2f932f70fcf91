//! Tick depth `F(H)` and liquidity cost `G(H)` of walking one side of the book.

use super::LobError;

/// Smallest level index `x` such that levels `0..=x` hold at least `shares`.
pub fn tick_depth(levels: &[u64], shares: u64) -> Result<usize, LobError> {
    let mut cum = 0u64;
    for (k, v) in levels.iter().enumerate() {
        cum += v;
        if cum >= shares {
            return Ok(k);
        }
    }
    Err(LobError::InsufficientLiquidity { requested: shares, available: cum })
}

/// Cost, in ticks, above `best * shares` of buying `shares` by walking `levels`:
/// `sum_{k<=F} k v_k - F (sum_{k<=F} v_k - H)`.
pub fn liquidity_cost(levels: &[u64], shares: u64) -> Result<f64, LobError> {
    let depth = tick_depth(levels, shares)?;
    let mut weighted = 0u64;
    let mut cum = 0u64;
    for (k, v) in levels[..=depth].iter().enumerate() {
        weighted += k as u64 * v;
        cum += v;
    }
    Ok(weighted as f64 - depth as f64 * (cum - shares) as f64)
}

/// Continuous approximation of the tick depth on a block book with `a` shares per level.
pub fn block_tick_depth(shares: f64, a: f64) -> f64 {
    shares / a
}

/// Continuous approximation `H^2 / (2a)` of the liquidity cost on a block book.
pub fn block_liquidity_cost(shares: f64, a: f64) -> f64 {
    shares * shares / (2.0 * a)
}
