//! Level-2 diff records and their CSV encoding.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::LobError;

/// Opaque order identifier as carried by the feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    fn code(self) -> &'static str {
        match self {
            Side::Bid => "B",
            Side::Ask => "S",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Book,
    Cancel,
    Trade,
}

impl Action {
    fn code(self) -> &'static str {
        match self {
            Action::Book => "BOOK",
            Action::Cancel => "CANCEL",
            Action::Trade => "TRADE",
        }
    }
}

/// One book/cancel/trade diff. Prices are integer multiples of the tick size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEvent {
    /// Nanoseconds since epoch.
    pub timestamp: i64,
    pub order_id: OrderId,
    pub side: Side,
    /// Price in ticks.
    pub price: i64,
    pub volume: u64,
    pub action: Action,
    pub counterparty_id: Option<OrderId>,
}

impl OrderEvent {
    pub fn book(timestamp: i64, id: u64, side: Side, price: i64, volume: u64) -> Self {
        Self { timestamp, order_id: OrderId(id), side, price, volume, action: Action::Book, counterparty_id: None }
    }

    pub fn cancel(timestamp: i64, id: u64, side: Side, price: i64, volume: u64) -> Self {
        Self { timestamp, order_id: OrderId(id), side, price, volume, action: Action::Cancel, counterparty_id: None }
    }

    pub fn trade(timestamp: i64, id: u64, side: Side, price: i64, volume: u64, aggressor: Option<u64>) -> Self {
        Self {
            timestamp,
            order_id: OrderId(id),
            side,
            price,
            volume,
            action: Action::Trade,
            counterparty_id: aggressor.map(OrderId),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["timestamp", "order_id", "side", "price", "volume", "action", "counterparty_id"];

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: i64,
    order_id: u64,
    side: String,
    price: f64,
    volume: u64,
    action: String,
    counterparty_id: Option<u64>,
}

/// Converts a decimal price to ticks, rejecting prices off the tick grid by
/// more than 1e-9 relative.
pub fn price_to_ticks(price: f64, tick_size: f64, line: usize) -> Result<i64, LobError> {
    let ticks = (price / tick_size).round();
    let back = ticks * tick_size;
    if !price.is_finite() || price <= 0.0 || (back - price).abs() > 1e-9 * price.abs() {
        return Err(LobError::NotTickMultiple { line, price });
    }
    Ok(ticks as i64)
}

pub fn ticks_to_price(ticks: i64, tick_size: f64) -> f64 {
    ticks as f64 * tick_size
}

/// Reads events in the `timestamp,order_id,side,price,volume,action,counterparty_id`
/// schema. `side` is `B`/`S`, `action` is `BOOK`/`CANCEL`/`TRADE`.
pub fn read_events_csv<R: Read>(reader: R, tick_size: f64) -> Result<Vec<OrderEvent>, LobError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| LobError::Csv { line: 1, message: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(LobError::Csv { line: 1, message: format!("unexpected header {:?}", headers) });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| LobError::Csv { line, message: e.to_string() })?;
        let side = match row.side.as_str() {
            "B" => Side::Bid,
            "S" => Side::Ask,
            other => return Err(LobError::Csv { line, message: format!("bad side {other:?}") }),
        };
        let action = match row.action.as_str() {
            "BOOK" => Action::Book,
            "CANCEL" => Action::Cancel,
            "TRADE" => Action::Trade,
            other => return Err(LobError::Csv { line, message: format!("bad action {other:?}") }),
        };
        out.push(OrderEvent {
            timestamp: row.timestamp,
            order_id: OrderId(row.order_id),
            side,
            price: price_to_ticks(row.price, tick_size, line)?,
            volume: row.volume,
            action,
            counterparty_id: row.counterparty_id.map(OrderId),
        });
    }
    Ok(out)
}

pub fn write_events_csv<W: Write>(writer: W, events: &[OrderEvent], tick_size: f64) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", CSV_HEADER.join(","))?;
    for ev in events {
        let cp = ev.counterparty_id.map(|c| c.0.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            ev.timestamp,
            ev.order_id.0,
            ev.side.code(),
            ticks_to_price(ev.price, tick_size),
            ev.volume,
            ev.action.code(),
            cp
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_cent_ticks() {
        let events = vec![
            OrderEvent::book(1, 7, Side::Ask, 10_001, 300),
            OrderEvent::book(2, 8, Side::Bid, 9_999, 100),
            OrderEvent::trade(3, 7, Side::Ask, 10_001, 50, Some(99)),
            OrderEvent::cancel(4, 8, Side::Bid, 9_999, 100),
        ];
        let mut buf = Vec::new();
        write_events_csv(&mut buf, &events, 0.01).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,order_id,side,price,volume,action,counterparty_id\n"));
        assert!(text.contains("3,7,S,100.01,50,TRADE,99\n"));
        let back = read_events_csv(buf.as_slice(), 0.01).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn off_grid_price_is_rejected() {
        let csv = "timestamp,order_id,side,price,volume,action,counterparty_id\n1,1,S,100.005,10,BOOK,\n";
        let err = read_events_csv(csv.as_bytes(), 0.01).unwrap_err();
        assert!(matches!(err, LobError::NotTickMultiple { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_action_names_the_line() {
        let csv =
            "timestamp,order_id,side,price,volume,action,counterparty_id\n1,1,S,100,10,BOOK,\n2,1,S,100,10,MODIFY,\n";
        let err = read_events_csv(csv.as_bytes(), 1.0).unwrap_err();
        assert!(matches!(err, LobError::Csv { line: 3, .. }), "{err:?}");
    }
}
