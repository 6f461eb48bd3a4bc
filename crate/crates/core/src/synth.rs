//! Deterministic synthetic minute-bar generator: a sine plus linear trend
//! with seeded noise. Used by the demo surfaces and the end-to-end tests;
//! real runs ingest delimited text instead.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::market_data::{BarSeries, MinuteBar};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: usize,
    pub minutes_per_day: usize,
    pub base_price: f64,
    /// Linear drift per trading day.
    pub trend_per_day: f64,
    pub sine_amplitude: f64,
    /// Period of the slow cycle, in trading minutes.
    pub sine_period_minutes: f64,
    /// Scale of the uniform price noise.
    pub noise: f64,
    pub base_volume: f64,
    pub seed: u64,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 60,
            minutes_per_day: 240,
            base_price: 4000.0,
            trend_per_day: 1.5,
            sine_amplitude: 40.0,
            sine_period_minutes: 1800.0,
            noise: 4.0,
            base_volume: 120.0,
            seed: 7,
            start_date: NaiveDate::from_ymd_opt(2020, 5, 18).expect("valid date"),
        }
    }
}

/// Generates a strictly ordered series whose closes follow
/// `base + trend * day + amplitude * sin(2 pi t / period) + noise`.
pub fn generate_series(config: &SynthConfig) -> BarSeries {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let session_open = config.start_date.and_hms_opt(9, 0, 0).expect("valid time");
    let mut bars = Vec::with_capacity(config.days * config.minutes_per_day);
    let mut prev_close = config.base_price;
    for day in 0..config.days {
        let day_start: NaiveDateTime = session_open + Duration::days(day as i64);
        for minute in 0..config.minutes_per_day {
            let t = (day * config.minutes_per_day + minute) as f64;
            let path = config.base_price
                + config.trend_per_day * day as f64
                + config.sine_amplitude
                    * (t * std::f64::consts::TAU / config.sine_period_minutes).sin();
            let close = (path + config.noise * rng.random_range(-1.0..1.0)).max(1e-6);
            let open = prev_close.max(1e-6);
            let wiggle = config.noise * 0.5 * rng.random_range(0.0..1.0);
            let high = open.max(close) + wiggle;
            let low = (open.min(close) - wiggle).max(open.min(close) * 0.5);
            let volume = config.base_volume * (0.5 + rng.random_range(0.0..1.0));
            bars.push(MinuteBar {
                timestamp: day_start + Duration::minutes(minute as i64),
                open,
                high,
                low,
                close,
                volume,
            });
            prev_close = close;
        }
    }
    BarSeries::try_new(bars).expect("generator keeps the bar invariants")
}

/// Writes the series in the default ingestion format
/// (`timestamp,open,high,low,close,volume`, ISO minute timestamps).
pub fn write_csv<W: std::io::Write>(series: &BarSeries, mut w: W) -> std::io::Result<()> {
    for bar in series.iter() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            bar.timestamp.format("%Y-%m-%dT%H:%M"),
            bar.open,
            bar.high,
            bar.low,
            bar.close,
            bar.volume
        )?;
    }
    Ok(())
}
