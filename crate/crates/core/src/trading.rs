//! Threshold trading decisions, fill simulation with fixed fees, and the
//! nine performance indicators.
//!
//! A prediction above `close * (1 + rate)` goes long, below
//! `close * (1 - rate)` goes short, anything inside the band does nothing.
//! Every position is held exactly one window and pays the flat round-trip
//! fee once. Returns are simple (non-compounded); the profit rate is their
//! sum expressed in percent.

use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TradingError {
    #[error("decision {index} at {time} is signaled but carries no prices")]
    MissingPrices { index: usize, time: NaiveDateTime },
    #[error("decisions are not time-ordered at index {index}")]
    OutOfOrder { index: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    Long,
    Short,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Long,
    Short,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Long => write!(f, "long"),
            Direction::Short => write!(f, "short"),
        }
    }
}

/// The decision band around the current close.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalThresholds {
    pub long_threshold: f64,
    pub short_threshold: f64,
    pub rate: f64,
}

impl SignalThresholds {
    pub fn from_close(close: f64, rate: f64) -> Self {
        Self {
            long_threshold: close * (1.0 + rate),
            short_threshold: close * (1.0 - rate),
            rate,
        }
    }
}

/// Long above the band, short below it, nothing inside. Boundaries are
/// excluded by the strict inequalities.
pub fn decide(predicted_next: f64, close: f64, rate: f64) -> Signal {
    let thresholds = SignalThresholds::from_close(close, rate);
    if predicted_next > thresholds.long_threshold {
        Signal::Long
    } else if predicted_next < thresholds.short_threshold {
        Signal::Short
    } else {
        Signal::None
    }
}

/// One per-window decision with the prices needed to fill it. `None` signals
/// may omit prices.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEvent {
    pub signal: Signal,
    pub entry_time: NaiveDateTime,
    pub exit_time: NaiveDateTime,
    pub entry_price: Option<f64>,
    pub exit_price: Option<f64>,
}

/// An executed round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub direction: Direction,
    pub entry_time: NaiveDateTime,
    pub exit_time: NaiveDateTime,
    pub entry_price: f64,
    pub exit_price: f64,
    pub fee_rate: f64,
    pub net_return: f64,
}

impl Trade {
    pub fn new(
        direction: Direction,
        entry_time: NaiveDateTime,
        exit_time: NaiveDateTime,
        entry_price: f64,
        exit_price: f64,
        fee_rate: f64,
    ) -> Self {
        let gross = match direction {
            Direction::Long => (exit_price - entry_price) / entry_price,
            Direction::Short => (entry_price - exit_price) / entry_price,
        };
        Self {
            direction,
            entry_time,
            exit_time,
            entry_price,
            exit_price,
            fee_rate,
            net_return: gross - fee_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeLog {
    pub trades: Vec<Trade>,
}

impl TradeLog {
    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TradingError> {
        writeln!(
            w,
            "direction,entry_time,exit_time,entry_price,exit_price,net_return"
        )?;
        for t in &self.trades {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t.direction, t.entry_time, t.exit_time, t.entry_price, t.exit_price, t.net_return
            )?;
        }
        Ok(())
    }
}

/// Turns time-ordered signals into executed trades. Positions are held for
/// exactly one window, so they never overlap; the fee is charged once per
/// round trip.
pub fn simulate(events: &[SignalEvent], fee_rate: f64) -> Result<TradeLog, TradingError> {
    let mut trades = Vec::new();
    let mut last_entry: Option<NaiveDateTime> = None;
    let mut last_position_exit: Option<NaiveDateTime> = None;
    for (index, event) in events.iter().enumerate() {
        if let Some(prev) = last_entry {
            if event.entry_time < prev {
                return Err(TradingError::OutOfOrder { index });
            }
        }
        last_entry = Some(event.entry_time);
        let direction = match event.signal {
            Signal::Long => Direction::Long,
            Signal::Short => Direction::Short,
            Signal::None => continue,
        };
        // A new position may only open once the previous one has closed.
        if let Some(prev_exit) = last_position_exit {
            if event.entry_time < prev_exit {
                return Err(TradingError::OutOfOrder { index });
            }
        }
        last_position_exit = Some(event.exit_time);
        let (entry, exit) = match (event.entry_price, event.exit_price) {
            (Some(entry), Some(exit)) => (entry, exit),
            _ => {
                return Err(TradingError::MissingPrices {
                    index,
                    time: event.entry_time,
                })
            }
        };
        trades.push(Trade::new(
            direction,
            event.entry_time,
            event.exit_time,
            entry,
            exit,
            fee_rate,
        ));
    }
    Ok(TradeLog { trades })
}

/// The nine indicators. Percentages follow the published convention: the
/// profit rate and the per-trade averages are percent figures, accuracy is
/// exported as a percent as well. Ratios whose denominators are empty are
/// reported as absent rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Total profit rate: the sum of net returns, in percent.
    pub pr_pct: f64,
    /// Total number of trades.
    pub tn: usize,
    /// Profitable trades (net return > 0).
    pub tn_plus: usize,
    /// Non-profitable trades (net return <= 0).
    pub tn_minus: usize,
    /// PR / TN; absent when no trades executed.
    pub avg_return: Option<f64>,
    /// Mean winning net return in percent; absent without winners.
    pub avg_profit: Option<f64>,
    /// Mean losing net return in percent (non-positive); absent without losers.
    pub avg_loss: Option<f64>,
    /// avg_profit / |avg_loss|; absent when either side is empty.
    pub pl_ratio: Option<f64>,
    /// TN+ / TN as a percent; absent when no trades executed.
    pub accuracy_pct: Option<f64>,
}

/// Computes the nine indicators from an executed trade log. Zero-return
/// trades count as non-profitable.
pub fn report(log: &TradeLog) -> MetricsReport {
    let tn = log.trades.len();
    let mut winners = 0usize;
    let mut winner_sum = 0.0f64;
    let mut loser_sum = 0.0f64;
    let mut total = 0.0f64;
    for trade in &log.trades {
        total += trade.net_return;
        if trade.net_return > 0.0 {
            winners += 1;
            winner_sum += trade.net_return;
        } else {
            loser_sum += trade.net_return;
        }
    }
    let losers = tn - winners;
    let pr_pct = total * 100.0;
    let avg_profit = (winners > 0).then(|| winner_sum / winners as f64 * 100.0);
    let avg_loss = (losers > 0).then(|| loser_sum / losers as f64 * 100.0);
    let pl_ratio = match (avg_profit, avg_loss) {
        (Some(p), Some(l)) if l != 0.0 => Some(p / l.abs()),
        _ => None,
    };
    MetricsReport {
        pr_pct,
        tn,
        tn_plus: winners,
        tn_minus: losers,
        avg_return: (tn > 0).then(|| pr_pct / tn as f64),
        avg_profit,
        avg_loss,
        pl_ratio,
        accuracy_pct: (tn > 0).then(|| winners as f64 / tn as f64 * 100.0),
    }
}
