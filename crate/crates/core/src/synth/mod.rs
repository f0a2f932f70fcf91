//! Labeled synthetic level-2 streams.
//!
//! Time is cut into periods of length `f`. At every period boundary all
//! resting orders are cancelled and a fresh random book is posted around the
//! current price, with a one-tick spread. Inside the period one optional
//! market order arrives shortly before the next boundary; its sweep depth is
//! drawn from `dq`. At the boundary the price moves by `x + y`, where
//! `x ~ dp(i)` for the exact time-averaged weighted imbalance `i` of the
//! period and `y` is the signed depth swept by the market order.
//!
//! During a spoof episode an optimal spoofer posts sell orders at its target
//! depths right after the boundary, lets them rest through the period, and
//! buys `H` shares right after the next boundary. Its resting orders are
//! cancelled with the rebuild.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::imbalance::{dp_of_imbalance, weighted_imbalance, DepthWeights, MarketModel, PriceDist};
use crate::lob::{BookSnapshot, OrderBook, OrderEvent, OrderId, Side, NANOS_PER_SECOND};
use crate::optimizer::{optimal_spoof_multi, MultiConfig, SpoofParams};

/// Delay after a boundary before the spoofer acts.
pub const SPOOF_DELAY_NANOS: i64 = 1_000_000;
/// Lead time of the legitimate market order before the next boundary.
pub const MARKET_ORDER_LEAD_NANOS: i64 = 2_000_000;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

/// One spoofing campaign over periods `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofEpisode {
    pub start: usize,
    pub end: usize,
    /// Depths (ticks beyond the best ask) the spoofer may post at.
    pub depths: Vec<usize>,
    /// Shares the spoofer buys after each spoofed period.
    pub volume: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Mean ask shares per level.
    pub a: f64,
    /// Mean bid shares per level.
    pub b: f64,
    /// Log-scale dispersion of individual level volumes.
    pub depth_dispersion: f64,
    /// AR(1) coefficient of the common bid/ask tilt factor.
    pub tilt_persistence: f64,
    /// Stationary standard deviation of the tilt factor.
    pub tilt_sd: f64,
    /// Posted levels per side; must exceed the model depth and the largest sweep.
    pub levels: usize,
    pub tick_size: f64,
    /// Initial best bid in ticks.
    pub start_price: i64,
    pub model: MarketModel,
    pub periods: usize,
    pub period_seconds: f64,
    /// Probability that a period carries a market order.
    pub market_order_prob: f64,
    pub episodes: Vec<SpoofEpisode>,
    /// Drive price moves with this imbalance instead of the measured one.
    pub fixed_imbalance: Option<f64>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            a: 100.0,
            b: 100.0,
            depth_dispersion: 0.5,
            tilt_persistence: 0.5,
            tilt_sd: 0.25,
            levels: 8,
            tick_size: 0.01,
            start_price: 10_000,
            model: reference_model(),
            periods: 10_000,
            period_seconds: 1.0,
            market_order_prob: 1.0,
            episodes: Vec::new(),
            fixed_imbalance: None,
            seed: 0,
        }
    }
}

/// Five equally weighted levels, a right-skewed move law on `-4..=4` and rare
/// multi-level sweeps.
pub fn reference_model() -> MarketModel {
    let weights = DepthWeights::uniform(5);
    let dp_plus = PriceDist::new(vec![0.005, 0.01, 0.03, 0.14, 0.34, 0.27, 0.13, 0.05, 0.025]).expect("valid law");
    let dq = PriceDist::new(vec![0.0, 0.0, 0.005, 0.01, 0.97, 0.01, 0.005, 0.0, 0.0]).expect("valid law");
    MarketModel::new(weights, dp_plus, dq, 0.01).expect("valid model")
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.a > 0.0 && self.b > 0.0) {
            return bad("base depths must be positive".into());
        }
        if self.periods == 0 || !(self.period_seconds > 0.0) {
            return bad("horizon and period length must be positive".into());
        }
        let f = self.period_nanos();
        if f <= SPOOF_DELAY_NANOS + MARKET_ORDER_LEAD_NANOS {
            return bad(format!("period of {f} ns is too short"));
        }
        if !(self.tick_size > 0.0) || self.start_price <= 0 {
            return bad("tick size and start price must be positive".into());
        }
        if !(self.depth_dispersion >= 0.0 && self.tilt_sd >= 0.0) || !(self.tilt_persistence.abs() < 1.0) {
            return bad("dispersion must be non-negative and |persistence| < 1".into());
        }
        let sweep = self.model.dq().max_move();
        if self.levels <= self.model.depth().max(sweep) {
            return bad(format!(
                "{} levels cannot hold model depth {} and sweeps of {sweep}",
                self.levels,
                self.model.depth()
            ));
        }
        if !(0.0..=1.0).contains(&self.market_order_prob) {
            return bad("market order probability must lie in [0, 1]".into());
        }
        if let Some(i) = self.fixed_imbalance {
            if !(0.0..=1.0).contains(&i) {
                return bad("fixed imbalance must lie in [0, 1]".into());
            }
        }
        let mut eps: Vec<&SpoofEpisode> = self.episodes.iter().collect();
        eps.sort_by_key(|e| e.start);
        for (i, e) in eps.iter().enumerate() {
            if e.start >= e.end || e.end > self.periods {
                return bad(format!("episode {}..{} is empty or outside the horizon", e.start, e.end));
            }
            if e.depths.is_empty() || e.depths.iter().any(|&k| k > self.model.depth()) {
                return bad(format!("episode {}..{} has no valid target depth", e.start, e.end));
            }
            if e.volume == 0 {
                return bad("episode volume must be positive".into());
            }
            if i > 0 && eps[i - 1].end > e.start {
                return bad("episodes overlap".into());
            }
        }
        Ok(())
    }

    pub fn period_nanos(&self) -> i64 {
        (self.period_seconds * NANOS_PER_SECOND).round() as i64
    }

    fn episode_at(&self, period: usize) -> Option<&SpoofEpisode> {
        self.episodes.iter().find(|e| (e.start..e.end).contains(&period))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLabel {
    pub start_period: usize,
    pub end_period: usize,
    /// Nanosecond interval during which spoof orders may rest.
    pub start: i64,
    pub end: i64,
    pub depths: Vec<usize>,
    pub volume: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofOrderLabel {
    pub order_id: OrderId,
    pub period: usize,
    pub timestamp: i64,
    pub depth: usize,
    pub volume: u64,
    pub executed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpoofTradeLabel {
    pub aggressor: OrderId,
    pub period: usize,
    pub timestamp: i64,
    pub volume: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub seed: u64,
    pub periods: usize,
    pub period_seconds: f64,
    pub episodes: Vec<EpisodeLabel>,
    pub spoof_orders: Vec<SpoofOrderLabel>,
    pub spoof_market_orders: Vec<SpoofTradeLabel>,
}

impl Labels {
    /// Whether `t` falls inside a labeled episode.
    pub fn in_episode(&self, t: i64) -> bool {
        self.episodes.iter().any(|e| t >= e.start && t < e.end)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<OrderEvent>,
    pub labels: Labels,
    /// Book right after each rebuild, `periods + 1` entries, full posted depth.
    pub boundaries: Vec<BookSnapshot>,
    /// Exact time-averaged weighted imbalance of each period.
    pub imbalances: Vec<f64>,
    /// `(x, y)` per period: limit-order move and signed market-order sweep.
    pub moves: Vec<(i64, i64)>,
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    book: OrderBook,
    events: Vec<OrderEvent>,
    next_id: u64,
    /// Open spoof orders: id -> label index.
    spoof_open: BTreeMap<u64, usize>,
    labels: Labels,
    // running weighted integrals of the current period
    last_t: i64,
    w_bid: f64,
    w_ask: f64,
    acc_bid: f64,
    acc_ask: f64,
}

impl Sim<'_> {
    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn emit(&mut self, ev: OrderEvent) {
        self.book.apply_event(&ev).expect("simulator emits legal diffs");
        self.events.push(ev);
    }

    /// Closes the segment ending at `t` and samples the book for the next one.
    fn settle(&mut self, t: i64) {
        let dt = (t - self.last_t) as f64 / NANOS_PER_SECOND;
        self.acc_bid += self.w_bid * dt;
        self.acc_ask += self.w_ask * dt;
        self.last_t = t;
        let snap = self.book.snapshot_at(t, self.cfg.model.depth()).expect("both sides posted");
        let w = self.cfg.model.weights().as_slice();
        self.w_bid = w.iter().zip(&snap.bid).map(|(w, v)| w * *v as f64).sum();
        self.w_ask = w.iter().zip(&snap.ask).map(|(w, v)| w * *v as f64).sum();
    }

    fn rebuild(&mut self, t: i64, best_bid: i64, tilt: f64) {
        let mut open: Vec<(OrderId, Side, i64, u64)> =
            self.book.open_orders().map(|(id, o)| (*id, o.side, o.price, o.remaining)).collect();
        open.sort_by_key(|o| o.0);
        for (id, side, price, remaining) in open {
            self.emit(OrderEvent::cancel(t, id.0, side, price, remaining));
        }
        self.spoof_open.clear();
        let s = self.cfg.depth_dispersion;
        for k in 0..self.cfg.levels as i64 {
            for (side, base, sign) in [(Side::Bid, self.cfg.b, 1.0), (Side::Ask, self.cfg.a, -1.0)] {
                let e: f64 = self.rng.sample(StandardNormal);
                let vol = (base * (s * e - 0.5 * s * s + sign * tilt).exp()).round().max(1.0) as u64;
                let price = match side {
                    Side::Bid => best_bid - k,
                    Side::Ask => best_bid + 1 + k,
                };
                let id = self.id();
                self.emit(OrderEvent::book(t, id, side, price, vol));
            }
        }
    }

    /// Sends a market order on `side` (the aggressor side) for `volume`
    /// shares, filling resting orders by price then arrival.
    fn market_order(&mut self, t: i64, side: Side, volume: u64) -> u64 {
        let resting = side.opposite();
        let mut queue: Vec<(i64, u64, u64)> = self
            .book
            .open_orders()
            .filter(|(_, o)| o.side == resting)
            .map(|(id, o)| (o.price, id.0, o.remaining))
            .collect();
        queue.sort_by_key(|&(p, id, _)| (if resting == Side::Ask { p } else { -p }, id));
        let aggressor = self.id();
        let mut left = volume;
        for (price, id, remaining) in queue {
            if left == 0 {
                break;
            }
            let fill = left.min(remaining);
            left -= fill;
            if let Some(&l) = self.spoof_open.get(&id) {
                self.labels.spoof_orders[l].executed += fill;
            }
            self.emit(OrderEvent::trade(t, id, resting, price, fill, Some(aggressor)));
        }
        aggressor
    }

    fn post_spoof(&mut self, t: i64, period: usize, ep: &SpoofEpisode) {
        let model = &self.cfg.model;
        let snap = self.book.snapshot_at(t, model.depth()).expect("both sides posted");
        let Ok(ibar) = weighted_imbalance(&snap, model.weights()) else { return };
        let a = snap.ask.iter().sum::<u64>() as f64 / snap.ask.len() as f64;
        if !(ibar > 0.0 && ibar < 1.0 && a > 0.0) {
            return;
        }
        let Ok(mut p) = SpoofParams::from_model(model, ibar, ep.volume as f64 / a, a, 0.0) else { return };
        for (k, d) in p.depths.iter_mut().enumerate() {
            if !ep.depths.contains(&k) {
                d.w = 0.0;
            }
        }
        let sol = optimal_spoof_multi(&p, &MultiConfig::default());
        for (k, v) in sol.volumes.iter().enumerate() {
            let vol = v.round() as u64;
            if vol == 0 {
                continue;
            }
            let id = self.id();
            self.emit(OrderEvent::book(t, id, Side::Ask, snap.best_ask + k as i64, vol));
            self.spoof_open.insert(id, self.labels.spoof_orders.len());
            self.labels.spoof_orders.push(SpoofOrderLabel {
                order_id: OrderId(id),
                period,
                timestamp: t,
                depth: k,
                volume: vol,
                executed: 0,
            });
        }
    }

    /// Volume whose sweep reaches exactly `depth` levels on the side opposite `side`.
    fn sweep_volume(&mut self, t: i64, side: Side, depth: usize) -> u64 {
        let snap = self.book.snapshot_at(t, depth).expect("both sides posted");
        let levels = snap.levels(side.opposite());
        let before: u64 = levels[..depth].iter().sum();
        before + self.rng.random_range(1..=levels[depth])
    }
}

fn draw(dist: &PriceDist, rng: &mut ChaCha8Rng) -> i64 {
    let idx = WeightedIndex::new(dist.probs()).expect("a valid law has positive mass");
    idx.sample(rng) as i64 - dist.max_move() as i64
}

/// Runs the simulator. Identical configs produce identical streams.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let f = cfg.period_nanos();
    let episodes = cfg
        .episodes
        .iter()
        .map(|e| EpisodeLabel {
            start_period: e.start,
            end_period: e.end,
            start: e.start as i64 * f + SPOOF_DELAY_NANOS,
            end: e.end as i64 * f + 2 * SPOOF_DELAY_NANOS,
            depths: e.depths.clone(),
            volume: e.volume,
        })
        .collect();
    let mut sim = Sim {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        book: OrderBook::new(),
        events: Vec::new(),
        next_id: 0,
        spoof_open: BTreeMap::new(),
        labels: Labels {
            seed: cfg.seed,
            periods: cfg.periods,
            period_seconds: cfg.period_seconds,
            episodes,
            spoof_orders: Vec::new(),
            spoof_market_orders: Vec::new(),
        },
        last_t: 0,
        w_bid: 0.0,
        w_ask: 0.0,
        acc_bid: 0.0,
        acc_ask: 0.0,
    };
    let model = &cfg.model;
    let dq = WeightedIndex::new(model.dq().probs()).expect("valid law");
    let phi = cfg.tilt_persistence;
    let innovation = cfg.tilt_sd * (1.0 - phi * phi).sqrt();
    let mut tilt = cfg.tilt_sd * sim.rng.sample::<f64, _>(StandardNormal);
    let mut best_bid = cfg.start_price;
    let mut pending_buy: Option<u64> = None;
    let (mut boundaries, mut imbalances, mut moves) = (Vec::new(), Vec::new(), Vec::new());

    for period in 0..=cfg.periods {
        let t0 = period as i64 * f;
        if best_bid <= cfg.levels as i64 {
            return Err(SimError::Config(format!("price walked to {best_bid} ticks; raise start_price")));
        }
        sim.rebuild(t0, best_bid, tilt);
        boundaries.push(sim.book.snapshot_at(t0, cfg.levels - 1).expect("both sides posted"));
        sim.last_t = t0;
        sim.acc_bid = 0.0;
        sim.acc_ask = 0.0;
        sim.settle(t0);

        let ts = t0 + SPOOF_DELAY_NANOS;
        if let Some(h) = pending_buy.take() {
            let available: u64 = sim.book.side_levels(Side::Ask).iter().map(|l| l.1).sum();
            let volume = h.min(available.saturating_sub(1));
            if volume > 0 {
                let aggressor = sim.market_order(ts, Side::Bid, volume);
                sim.labels.spoof_market_orders.push(SpoofTradeLabel {
                    aggressor: OrderId(aggressor),
                    period: period - 1,
                    timestamp: ts,
                    volume,
                });
            }
        }
        if period == cfg.periods {
            break;
        }
        if let Some(ep) = cfg.episode_at(period) {
            sim.post_spoof(ts, period, ep);
            pending_buy = Some(ep.volume);
        }
        sim.settle(ts);

        let tm = t0 + f - MARKET_ORDER_LEAD_NANOS;
        let mut y = 0;
        if sim.rng.random::<f64>() < cfg.market_order_prob {
            y = dq.sample(&mut sim.rng) as i64 - model.dq().max_move() as i64;
            let side = match y.signum() {
                1 => Side::Bid,
                -1 => Side::Ask,
                _ if sim.rng.random::<bool>() => Side::Bid,
                _ => Side::Ask,
            };
            let volume = sim.sweep_volume(tm, side, y.unsigned_abs() as usize);
            sim.market_order(tm, side, volume);
            sim.settle(tm);
        }
        sim.settle(t0 + f);

        let i = sim.acc_bid / (sim.acc_bid + sim.acc_ask);
        imbalances.push(i);
        let x = draw(&dp_of_imbalance(model, cfg.fixed_imbalance.unwrap_or(i)), &mut sim.rng);
        moves.push((x, y));
        best_bid += x + y;
        tilt = phi * tilt + innovation * sim.rng.sample::<f64, _>(StandardNormal);
    }
    Ok(SimOutput { events: sim.events, labels: sim.labels, boundaries, imbalances, moves })
}

/// Non-overlapping episodes covering about `fraction` of the horizon, each
/// `length` periods long, placed at random.
pub fn random_episodes(
    periods: usize,
    fraction: f64,
    length: usize,
    depths: &[usize],
    volume: u64,
    seed: u64,
) -> Vec<SpoofEpisode> {
    let count = ((periods as f64 * fraction) / length as f64).round() as usize;
    if count == 0 || length == 0 {
        return Vec::new();
    }
    // split the free time into count + 1 random gaps
    let free = periods.saturating_sub(count * length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cuts: Vec<usize> = (0..count).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    cuts.iter()
        .enumerate()
        .map(|(j, &c)| SpoofEpisode {
            start: c + j * length,
            end: c + (j + 1) * length,
            depths: depths.to_vec(),
            volume,
        })
        .collect()
}
