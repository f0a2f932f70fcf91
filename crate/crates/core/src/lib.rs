//! Static spoofing model for limit order books: book reconstruction, weighted
//! imbalance, the spoofer's optimal strategy, calibration from level-2 data,
//! and a conditional-Wasserstein spoofing monitor.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod detector;
pub mod imbalance;
pub mod lob;
pub mod numeric;
pub mod optimizer;
pub mod synth;
