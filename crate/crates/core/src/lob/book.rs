use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::event::{Action, OrderEvent, OrderId, Side};
use super::LobError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenOrder {
    pub side: Side,
    pub price: i64,
    pub remaining: u64,
}

/// What an applied event did to the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Booked,
    Cancelled,
    /// Resident volume was executed against an incoming order.
    Traded {
        resting_side: Side,
        volume: u64,
    },
    /// Aggressor-side duplicate of a trade already applied on the resting order.
    DuplicateTradeReport,
}

/// Full-depth book: price level maps per side plus every open order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderBook {
    bids: BTreeMap<i64, u64>,
    asks: BTreeMap<i64, u64>,
    open: HashMap<OrderId, OpenOrder>,
    filled: HashSet<OrderId>,
}

/// Relative-depth view of the book: `ask[k]` is the volume at `best_ask + k`
/// ticks and `bid[k]` the volume at `best_bid - k` ticks, for `k = 0..=depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub timestamp: i64,
    pub best_ask: i64,
    pub best_bid: i64,
    pub ask: Vec<u64>,
    pub bid: Vec<u64>,
}

impl BookSnapshot {
    pub fn depth(&self) -> usize {
        self.ask.len() - 1
    }

    pub fn levels(&self, side: Side) -> &[u64] {
        match side {
            Side::Ask => &self.ask,
            Side::Bid => &self.bid,
        }
    }

    /// Mid price in ticks.
    pub fn mid(&self) -> f64 {
        0.5 * (self.best_ask + self.best_bid) as f64
    }
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn best_bid(&self) -> Option<i64> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<i64> {
        self.asks.keys().next().copied()
    }

    pub fn level_volume(&self, side: Side, price: i64) -> u64 {
        self.levels(side).get(&price).copied().unwrap_or(0)
    }

    pub fn open_order(&self, id: OrderId) -> Option<&OpenOrder> {
        self.open.get(&id)
    }

    pub fn open_orders(&self) -> impl Iterator<Item = (&OrderId, &OpenOrder)> {
        self.open.iter()
    }

    /// Price levels of one side, best first.
    pub fn side_levels(&self, side: Side) -> Vec<(i64, u64)> {
        match side {
            Side::Ask => self.asks.iter().map(|(p, v)| (*p, *v)).collect(),
            Side::Bid => self.bids.iter().rev().map(|(p, v)| (*p, *v)).collect(),
        }
    }

    fn levels(&self, side: Side) -> &BTreeMap<i64, u64> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<i64, u64> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    fn reduce_level(&mut self, side: Side, price: i64, volume: u64) {
        let levels = self.levels_mut(side);
        if let Some(v) = levels.get_mut(&price) {
            *v -= volume;
            if *v == 0 {
                levels.remove(&price);
            }
        }
    }

    /// Applies one diff in place.
    pub fn apply_event(&mut self, ev: &OrderEvent) -> Result<Applied, LobError> {
        match ev.action {
            Action::Book => {
                if ev.price <= 0 {
                    return Err(LobError::InvalidEvent { order_id: ev.order_id, reason: "non-positive price" });
                }
                if self.open.contains_key(&ev.order_id) {
                    return Err(LobError::DuplicateOrderId(ev.order_id));
                }
                let crosses = match ev.side {
                    Side::Bid => self.best_ask().is_some_and(|a| ev.price >= a),
                    Side::Ask => self.best_bid().is_some_and(|b| ev.price <= b),
                };
                if crosses {
                    return Err(LobError::CrossedBook { order_id: ev.order_id, price: ev.price });
                }
                if ev.volume == 0 {
                    return Ok(Applied::Booked);
                }
                *self.levels_mut(ev.side).entry(ev.price).or_insert(0) += ev.volume;
                self.open.insert(ev.order_id, OpenOrder { side: ev.side, price: ev.price, remaining: ev.volume });
                Ok(Applied::Booked)
            }
            Action::Cancel => {
                let order = self.open.remove(&ev.order_id).ok_or(LobError::UnknownOrderId(ev.order_id))?;
                self.reduce_level(order.side, order.price, order.remaining);
                Ok(Applied::Cancelled)
            }
            Action::Trade => {
                let Some(order) = self.open.get_mut(&ev.order_id) else {
                    let duplicate =
                        ev.counterparty_id.is_some_and(|c| self.open.contains_key(&c) || self.filled.contains(&c));
                    return if duplicate {
                        Ok(Applied::DuplicateTradeReport)
                    } else {
                        Err(LobError::UnknownOrderId(ev.order_id))
                    };
                };
                if ev.volume > order.remaining {
                    return Err(LobError::NegativeResidual {
                        order_id: ev.order_id,
                        requested: ev.volume,
                        resident: order.remaining,
                    });
                }
                order.remaining -= ev.volume;
                let OpenOrder { side, price, remaining } = *order;
                if remaining == 0 {
                    self.open.remove(&ev.order_id);
                    self.filled.insert(ev.order_id);
                }
                self.reduce_level(side, price, ev.volume);
                Ok(Applied::Traded { resting_side: side, volume: ev.volume })
            }
        }
    }

    /// Relative-depth vectors out to `depth` ticks from each best quote.
    pub fn snapshot_at(&self, timestamp: i64, depth: usize) -> Result<BookSnapshot, LobError> {
        let best_ask = self.best_ask().ok_or(LobError::EmptySide(Side::Ask))?;
        let best_bid = self.best_bid().ok_or(LobError::EmptySide(Side::Bid))?;
        let mut ask = vec![0u64; depth + 1];
        for (p, v) in self.asks.range(best_ask..=best_ask + depth as i64) {
            ask[(p - best_ask) as usize] = *v;
        }
        let mut bid = vec![0u64; depth + 1];
        for (p, v) in self.bids.range(best_bid - depth as i64..=best_bid) {
            bid[(best_bid - p) as usize] = *v;
        }
        Ok(BookSnapshot { timestamp, best_ask, best_bid, ask, bid })
    }

    /// Checks that level volumes equal the sum of their open orders and the
    /// book is not crossed.
    pub fn check_invariants(&self) -> bool {
        let mut bids: BTreeMap<i64, u64> = BTreeMap::new();
        let mut asks: BTreeMap<i64, u64> = BTreeMap::new();
        for o in self.open.values() {
            let m = if o.side == Side::Bid { &mut bids } else { &mut asks };
            *m.entry(o.price).or_insert(0) += o.remaining;
        }
        let uncrossed = match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => b < a,
            _ => true,
        };
        bids == self.bids && asks == self.asks && uncrossed
    }
}
