//! Replays an event stream into a piecewise-constant timeline of book states,
//! with per-level time integrals for window averages, and extracts market
//! orders together with the book they walked.

use super::book::{Applied, BookSnapshot, OrderBook};
use super::event::{Action, OrderEvent, OrderId, Side};
use super::LobError;

/// Seconds per timestamp unit (timestamps are nanoseconds).
pub const NANOS_PER_SECOND: f64 = 1e9;

/// A market order reconstructed from consecutive trade records that share a
/// timestamp and aggressor.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketOrder {
    pub timestamp: i64,
    /// Side of the aggressor: `Bid` for a buy market order.
    pub side: Side,
    pub volume: u64,
    pub aggressor: Option<OrderId>,
    /// Book right before the first fill, if both sides were populated.
    pub pre_trade: Option<BookSnapshot>,
    /// Resting orders hit, in fill order.
    pub fills: Vec<OrderId>,
}

/// Book states after each timestamp group. State `i` holds on
/// `[times[i], times[i+1])`; the last state persists indefinitely.
#[derive(Debug, Clone)]
pub struct BookTimeline {
    depth: usize,
    times: Vec<i64>,
    best_bid: Vec<Option<i64>>,
    best_ask: Vec<Option<i64>>,
    bid: Vec<f64>,
    ask: Vec<f64>,
    // integral of each level from times[0] to times[i], in share-seconds
    cum_bid: Vec<f64>,
    cum_ask: Vec<f64>,
}

/// Everything produced by a replay.
#[derive(Debug, Clone)]
pub struct Replay {
    pub timeline: BookTimeline,
    pub market_orders: Vec<MarketOrder>,
    pub book: OrderBook,
}

/// Replays events in file order. Timestamps must be nondecreasing; errors
/// carry the zero-based index of the offending record.
pub fn replay(events: &[OrderEvent], depth: usize) -> Result<Replay, LobError> {
    let mut book = OrderBook::new();
    let mut timeline = BookTimeline::empty(depth);
    let mut market_orders: Vec<MarketOrder> = Vec::new();
    let mut last_ts = i64::MIN;
    // index into market_orders of the group still accepting fills
    let mut open_group: Option<usize> = None;

    for (index, ev) in events.iter().enumerate() {
        if ev.timestamp < last_ts {
            return Err(LobError::OutOfOrder { index, timestamp: ev.timestamp, previous: last_ts });
        }
        if ev.timestamp != last_ts && last_ts != i64::MIN {
            timeline.push_state(last_ts, &book);
            open_group = None;
        }
        last_ts = ev.timestamp;

        let pre_trade = (ev.action == Action::Trade).then(|| book.snapshot_at(ev.timestamp, depth).ok()).flatten();
        let applied = book.apply_event(ev).map_err(|e| LobError::Record {
            index,
            timestamp: ev.timestamp,
            source: Box::new(e),
        })?;
        match applied {
            Applied::Traded { resting_side, volume } => {
                let aggressor_side = resting_side.opposite();
                let continues = open_group.is_some_and(|g| {
                    let mo = &market_orders[g];
                    mo.side == aggressor_side && mo.aggressor == ev.counterparty_id
                });
                if continues {
                    let mo = &mut market_orders[open_group.unwrap()];
                    mo.volume += volume;
                    mo.fills.push(ev.order_id);
                } else {
                    market_orders.push(MarketOrder {
                        timestamp: ev.timestamp,
                        side: aggressor_side,
                        volume,
                        aggressor: ev.counterparty_id,
                        pre_trade,
                        fills: vec![ev.order_id],
                    });
                    open_group = Some(market_orders.len() - 1);
                }
            }
            Applied::DuplicateTradeReport => {}
            Applied::Booked | Applied::Cancelled => open_group = None,
        }
    }
    if last_ts != i64::MIN {
        timeline.push_state(last_ts, &book);
    }
    Ok(Replay { timeline, market_orders, book })
}

impl BookTimeline {
    fn empty(depth: usize) -> Self {
        Self {
            depth,
            times: Vec::new(),
            best_bid: Vec::new(),
            best_ask: Vec::new(),
            bid: Vec::new(),
            ask: Vec::new(),
            cum_bid: Vec::new(),
            cum_ask: Vec::new(),
        }
    }

    /// Builds a timeline directly from snapshots (sorted by timestamp).
    pub fn from_snapshots(snapshots: &[BookSnapshot]) -> Self {
        let depth = snapshots.first().map_or(0, BookSnapshot::depth);
        let mut t = Self::empty(depth);
        for s in snapshots {
            assert_eq!(s.depth(), depth, "snapshots must share a depth");
            let bid: Vec<f64> = s.bid.iter().map(|&v| v as f64).collect();
            let ask: Vec<f64> = s.ask.iter().map(|&v| v as f64).collect();
            t.push_raw(s.timestamp, Some(s.best_bid), Some(s.best_ask), &bid, &ask);
        }
        t
    }

    fn push_state(&mut self, ts: i64, book: &OrderBook) {
        let n = self.depth + 1;
        match book.snapshot_at(ts, self.depth) {
            Ok(s) => {
                let bid: Vec<f64> = s.bid.iter().map(|&v| v as f64).collect();
                let ask: Vec<f64> = s.ask.iter().map(|&v| v as f64).collect();
                self.push_raw(ts, Some(s.best_bid), Some(s.best_ask), &bid, &ask);
            }
            Err(_) => {
                // one side empty: the populated side is still measured from its best quote
                let side_vec = |side: Side, best: Option<i64>| -> Vec<f64> {
                    let mut out = vec![0.0; n];
                    if let Some(b) = best {
                        for (p, v) in book.side_levels(side) {
                            let k = (p - b).unsigned_abs() as usize;
                            if k < n {
                                out[k] = v as f64;
                            }
                        }
                    }
                    out
                };
                let (bb, ba) = (book.best_bid(), book.best_ask());
                self.push_raw(ts, bb, ba, &side_vec(Side::Bid, bb), &side_vec(Side::Ask, ba));
            }
        }
    }

    fn push_raw(&mut self, ts: i64, bb: Option<i64>, ba: Option<i64>, bid: &[f64], ask: &[f64]) {
        let n = self.depth + 1;
        let i = self.times.len();
        if i == 0 {
            self.cum_bid.extend(std::iter::repeat_n(0.0, n));
            self.cum_ask.extend(std::iter::repeat_n(0.0, n));
        } else {
            let dt = (ts - self.times[i - 1]) as f64 / NANOS_PER_SECOND;
            for k in 0..n {
                let cb = self.cum_bid[(i - 1) * n + k] + dt * self.bid[(i - 1) * n + k];
                let ca = self.cum_ask[(i - 1) * n + k] + dt * self.ask[(i - 1) * n + k];
                self.cum_bid.push(cb);
                self.cum_ask.push(ca);
            }
        }
        self.times.push(ts);
        self.best_bid.push(bb);
        self.best_ask.push(ba);
        self.bid.extend_from_slice(bid);
        self.ask.extend_from_slice(ask);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> Option<i64> {
        self.times.first().copied()
    }

    pub fn end(&self) -> Option<i64> {
        self.times.last().copied()
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    /// Index of the state in force at `t`, i.e. the last one with `times[i] <= t`.
    pub fn state_index(&self, t: i64) -> Option<usize> {
        match self.times.partition_point(|&s| s <= t) {
            0 => None,
            p => Some(p - 1),
        }
    }

    pub fn state_levels(&self, i: usize) -> (&[f64], &[f64]) {
        let n = self.depth + 1;
        (&self.bid[i * n..(i + 1) * n], &self.ask[i * n..(i + 1) * n])
    }

    pub fn best_quotes(&self, i: usize) -> (Option<i64>, Option<i64>) {
        (self.best_bid[i], self.best_ask[i])
    }

    /// Mid price in ticks of the state in force at `t`.
    pub fn mid_at(&self, t: i64) -> Option<f64> {
        let i = self.state_index(t)?;
        match (self.best_bid[i], self.best_ask[i]) {
            (Some(b), Some(a)) => Some(0.5 * (a + b) as f64),
            _ => None,
        }
    }

    fn integral_to(&self, t: i64, level: usize, cum: &[f64], vals: &[f64]) -> f64 {
        let n = self.depth + 1;
        match self.state_index(t) {
            None => 0.0,
            Some(i) => cum[i * n + level] + (t - self.times[i]) as f64 / NANOS_PER_SECOND * vals[i * n + level],
        }
    }

    /// Time integrals (share-seconds) of each level over `[t0, t1)`, restricted
    /// to the part of the window covered by the timeline. Returns
    /// `(bid, ask, covered_seconds)`.
    pub fn window_integrals(&self, t0: i64, t1: i64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.depth + 1;
        let Some(&first) = self.times.first() else {
            return (vec![0.0; n], vec![0.0; n], 0.0);
        };
        let start = t0.max(first);
        if t1 <= start {
            return (vec![0.0; n], vec![0.0; n], 0.0);
        }
        let mut bid = Vec::with_capacity(n);
        let mut ask = Vec::with_capacity(n);
        for k in 0..n {
            bid.push(
                self.integral_to(t1, k, &self.cum_bid, &self.bid)
                    - self.integral_to(start, k, &self.cum_bid, &self.bid),
            );
            ask.push(
                self.integral_to(t1, k, &self.cum_ask, &self.ask)
                    - self.integral_to(start, k, &self.cum_ask, &self.ask),
            );
        }
        (bid, ask, (t1 - start) as f64 / NANOS_PER_SECOND)
    }
}
