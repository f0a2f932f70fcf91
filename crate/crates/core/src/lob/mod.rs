//! Order book reconstruction from level-2 diffs and the tick-depth/liquidity
//! cost functionals of a book side.

mod book;
mod event;
mod liquidity;
mod timeline;

pub use book::{Applied, BookSnapshot, OpenOrder, OrderBook};
pub use event::{
    price_to_ticks, read_events_csv, ticks_to_price, write_events_csv, Action, OrderEvent, OrderId, Side, CSV_HEADER,
};
pub use liquidity::{block_liquidity_cost, block_tick_depth, liquidity_cost, tick_depth};
pub use timeline::{replay, BookTimeline, MarketOrder, Replay, NANOS_PER_SECOND};

#[derive(Debug, thiserror::Error)]
pub enum LobError {
    #[error("unknown order id {0:?}")]
    UnknownOrderId(OrderId),
    #[error("trade of {requested} on order {order_id:?} exceeds resident volume {resident}")]
    NegativeResidual { order_id: OrderId, requested: u64, resident: u64 },
    #[error("order id {0:?} is already open")]
    DuplicateOrderId(OrderId),
    #[error("order {order_id:?} at {price} would cross the book")]
    CrossedBook { order_id: OrderId, price: i64 },
    #[error("invalid event for order {order_id:?}: {reason}")]
    InvalidEvent { order_id: OrderId, reason: &'static str },
    #[error("{0:?} side of the book is empty")]
    EmptySide(Side),
    #[error("{requested} shares requested but only {available} visible")]
    InsufficientLiquidity { requested: u64, available: u64 },
    #[error("record {index}: timestamp {timestamp} precedes {previous}")]
    OutOfOrder { index: usize, timestamp: i64, previous: i64 },
    #[error("record {index} (t={timestamp}): {source}")]
    Record { index: usize, timestamp: i64, source: Box<LobError> },
    #[error("line {line}: price {price} is not a multiple of the tick size")]
    NotTickMultiple { line: usize, price: f64 },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}
