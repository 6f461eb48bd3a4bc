//! Minute-bar ingestion, N-minute aggregation and walk-forward scheduling.
//!
//! Input is delimited text with one minute bar per row, columns in the order
//! `timestamp,open,high,low,close,volume`. Timestamps are exchange-local and
//! parsed with a configurable format string; no timezone arithmetic is done.

use std::io::BufRead;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: timestamp {current} does not advance past {previous}")]
    NonMonotonic {
        row: usize,
        previous: NaiveDateTime,
        current: NaiveDateTime,
    },
    #[error("input contains no minute bars")]
    Empty,
    #[error("aggregation period must be a positive number of minutes")]
    BadPeriod,
    #[error("series of {got} minutes is shorter than one period of {period}")]
    SeriesTooShort { got: usize, period: usize },
    #[error(
        "series ending {series_end} does not cover the schedule (needs data reaching {needed_end})"
    )]
    InsufficientSpan {
        series_end: NaiveDateTime,
        needed_end: NaiveDateTime,
    },
    #[error("aggregated bar must have at least one constituent minute")]
    EmptyAggregate,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One minute of OHLCV data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub timestamp: NaiveDateTime,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl MinuteBar {
    /// Checks the per-row price/volume invariants, returning a description of
    /// the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a positive finite price, got {v}"));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(format!("volume must be non-negative, got {}", self.volume));
        }
        if self.low > self.high {
            return Err(format!("low {} exceeds high {}", self.low, self.high));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!(
                "open {} outside the range [{}, {}]",
                self.open, self.low, self.high
            ));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!(
                "close {} outside the range [{}, {}]",
                self.close, self.low, self.high
            ));
        }
        Ok(())
    }
}

/// A validated, strictly time-ordered series of minute bars.
#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    bars: Vec<MinuteBar>,
}

impl BarSeries {
    /// Validates row invariants and strict timestamp ordering.
    pub fn try_new(bars: Vec<MinuteBar>) -> Result<Self, DataError> {
        if bars.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, bar) in bars.iter().enumerate() {
            bar.validate().map_err(|message| DataError::MalformedRow {
                row: i + 1,
                message,
            })?;
            if i > 0 && bar.timestamp <= bars[i - 1].timestamp {
                return Err(DataError::NonMonotonic {
                    row: i + 1,
                    previous: bars[i - 1].timestamp,
                    current: bar.timestamp,
                });
            }
        }
        Ok(Self { bars })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn first(&self) -> &MinuteBar {
        &self.bars[0]
    }

    pub fn last(&self) -> &MinuteBar {
        &self.bars[self.bars.len() - 1]
    }

    pub fn as_slice(&self) -> &[MinuteBar] {
        &self.bars
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MinuteBar> {
        self.bars.iter()
    }
}

/// Parsing options for delimited minute-bar text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseOptions {
    pub delimiter: char,
    pub has_header: bool,
    /// chrono format string, e.g. `%Y-%m-%dT%H:%M`.
    pub timestamp_format: String,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: false,
            timestamp_format: "%Y-%m-%dT%H:%M".to_string(),
        }
    }
}

/// Parses delimited text into a validated, time-ordered [`BarSeries`].
///
/// Rows that violate the OHLC invariants are rejected with their 1-based line
/// number and the offending field. Blank lines are skipped.
pub fn parse_minute_bars<R: BufRead>(
    reader: R,
    opts: &ParseOptions,
) -> Result<BarSeries, DataError> {
    let mut bars: Vec<MinuteBar> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if opts.has_header && idx == 0 {
            continue;
        }
        let bar = parse_row(trimmed, row, opts)?;
        if let Some(prev) = bars.last() {
            if bar.timestamp <= prev.timestamp {
                return Err(DataError::NonMonotonic {
                    row,
                    previous: prev.timestamp,
                    current: bar.timestamp,
                });
            }
        }
        bars.push(bar);
    }
    if bars.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(BarSeries { bars })
}

fn parse_row(line: &str, row: usize, opts: &ParseOptions) -> Result<MinuteBar, DataError> {
    let fields: Vec<&str> = line.split(opts.delimiter).map(str::trim).collect();
    if fields.len() != 6 {
        return Err(DataError::MalformedRow {
            row,
            message: format!("expected 6 fields, got {}", fields.len()),
        });
    }
    let timestamp =
        NaiveDateTime::parse_from_str(fields[0], &opts.timestamp_format).map_err(|e| {
            DataError::MalformedRow {
                row,
                message: format!("timestamp `{}`: {e}", fields[0]),
            }
        })?;
    let mut nums = [0.0f64; 5];
    for (i, name) in ["open", "high", "low", "close", "volume"]
        .iter()
        .enumerate()
    {
        nums[i] = fields[i + 1]
            .parse::<f64>()
            .map_err(|e| DataError::MalformedRow {
                row,
                message: format!("{name} `{}`: {e}", fields[i + 1]),
            })?;
    }
    let bar = MinuteBar {
        timestamp,
        open: nums[0],
        high: nums[1],
        low: nums[2],
        close: nums[3],
        volume: nums[4],
    };
    bar.validate()
        .map_err(|message| DataError::MalformedRow { row, message })?;
    Ok(bar)
}

/// An N-minute bar that keeps its constituent minutes so volume can later be
/// painted per price level.
#[derive(Debug, Clone, PartialEq)]
pub struct AggBar {
    start_time: NaiveDateTime,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: f64,
    minutes: Vec<MinuteBar>,
}

impl AggBar {
    /// Builds the aggregate from its constituent minutes: open of the first,
    /// close of the last, extreme high/low, summed volume.
    pub fn from_minutes(minutes: Vec<MinuteBar>) -> Result<Self, DataError> {
        let first = minutes.first().ok_or(DataError::EmptyAggregate)?;
        let last = minutes.last().expect("nonempty");
        let high = minutes
            .iter()
            .map(|m| m.high)
            .fold(f64::NEG_INFINITY, f64::max);
        let low = minutes.iter().map(|m| m.low).fold(f64::INFINITY, f64::min);
        let volume = minutes.iter().map(|m| m.volume).sum();
        Ok(Self {
            start_time: first.timestamp,
            open: first.open,
            high,
            low,
            close: last.close,
            volume,
            minutes,
        })
    }

    pub fn start_time(&self) -> NaiveDateTime {
        self.start_time
    }

    /// Timestamp of the last constituent minute.
    pub fn end_time(&self) -> NaiveDateTime {
        self.minutes.last().expect("nonempty").timestamp
    }

    pub fn open(&self) -> f64 {
        self.open
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn close(&self) -> f64 {
        self.close
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn minutes(&self) -> &[MinuteBar] {
        &self.minutes
    }

    /// A bar is a fall when it opens above its close; rising or flat bars are
    /// drawn on the green channel.
    pub fn is_falling(&self) -> bool {
        self.open > self.close
    }
}

/// Slices the series into consecutive non-overlapping groups of `period`
/// minutes. A trailing partial group is dropped rather than padded.
pub fn aggregate(series: &BarSeries, period: usize) -> Result<Vec<AggBar>, DataError> {
    if period == 0 {
        return Err(DataError::BadPeriod);
    }
    if series.len() < period {
        return Err(DataError::SeriesTooShort {
            got: series.len(),
            period,
        });
    }
    series
        .as_slice()
        .chunks_exact(period)
        .map(|chunk| AggBar::from_minutes(chunk.to_vec()))
        .collect()
}

/// One walk-forward split: a training interval followed directly by its test
/// interval. Both intervals are half-open `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitWindow {
    /// 1-based ordinal of the window.
    pub index: usize,
    pub train_start: NaiveDateTime,
    pub train_end: NaiveDateTime,
    pub test_start: NaiveDateTime,
    pub test_end: NaiveDateTime,
}

impl SplitWindow {
    pub fn contains_in_train(&self, t: NaiveDateTime) -> bool {
        t >= self.train_start && t < self.train_end
    }

    pub fn contains_in_test(&self, t: NaiveDateTime) -> bool {
        t >= self.test_start && t < self.test_end
    }
}

/// Builds `count` sliding train/test windows. Test ranges tile the evaluation
/// period contiguously starting `train_days` after the first timestamp; each
/// window trains on the `train_days` immediately preceding its test range.
pub fn make_schedule(
    series: &BarSeries,
    train_days: i64,
    test_days: i64,
    count: usize,
) -> Result<Vec<SplitWindow>, DataError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if train_days <= 0 || test_days <= 0 {
        return Err(DataError::BadPeriod);
    }
    let anchor = series.first().timestamp + Duration::days(train_days);
    // Session data rarely reaches the calendar end of the final half-open
    // range; it suffices that the final test window contains data at all.
    let final_test_start = anchor + Duration::days(test_days * (count as i64 - 1));
    let series_end = series.last().timestamp;
    if series_end < final_test_start {
        return Err(DataError::InsufficientSpan {
            series_end,
            needed_end: final_test_start,
        });
    }
    Ok((1..=count)
        .map(|i| {
            let test_start = anchor + Duration::days(test_days * (i as i64 - 1));
            SplitWindow {
                index: i,
                train_start: test_start - Duration::days(train_days),
                train_end: test_start,
                test_start,
                test_end: test_start + Duration::days(test_days),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn dt(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M").unwrap()
    }

    fn series_of(n: usize) -> BarSeries {
        let start = dt("2020-05-18T09:01");
        let bars = (0..n)
            .map(|i| MinuteBar {
                timestamp: start + Duration::minutes(i as i64),
                open: 100.0 + i as f64 * 0.01,
                high: 101.0 + i as f64 * 0.01,
                low: 99.0,
                close: 100.5,
                volume: 10.0 + (i % 7) as f64,
            })
            .collect();
        BarSeries::try_new(bars).unwrap()
    }

    #[test]
    fn parses_a_plain_row() {
        let input = "2020-05-18T09:01,4100,4105,4098,4103,250";
        let series = parse_minute_bars(Cursor::new(input), &ParseOptions::default()).unwrap();
        assert_eq!(series.len(), 1);
        let bar = series.first();
        assert_eq!(bar.timestamp, dt("2020-05-18T09:01"));
        assert_eq!(bar.open, 4100.0);
        assert_eq!(bar.high, 4105.0);
        assert_eq!(bar.low, 4098.0);
        assert_eq!(bar.close, 4103.0);
        assert_eq!(bar.volume, 250.0);
    }

    #[test]
    fn rejects_high_below_low_with_row_number() {
        let input =
            "2020-05-18T09:01,4100,4105,4098,4103,250\n2020-05-18T09:02,4100,4090,4098,4099,250";
        let err = parse_minute_bars(Cursor::new(input), &ParseOptions::default()).unwrap_err();
        match err {
            DataError::MalformedRow { row, message } => {
                assert_eq!(row, 2);
                assert!(message.contains("low"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotonic_timestamps() {
        let input =
            "2020-05-18T09:02,4100,4105,4098,4103,250\n2020-05-18T09:01,4100,4105,4098,4103,250";
        let err = parse_minute_bars(Cursor::new(input), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::NonMonotonic { row: 2, .. }));
    }

    #[test]
    fn rejects_empty_input() {
        let err = parse_minute_bars(Cursor::new(""), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Empty));
    }

    #[test]
    fn header_and_custom_delimiter() {
        let input = "time;open;high;low;close;volume\n2020-05-18T09:01;10;11;9;10.5;100";
        let opts = ParseOptions {
            delimiter: ';',
            has_header: true,
            ..ParseOptions::default()
        };
        let series = parse_minute_bars(Cursor::new(input), &opts).unwrap();
        assert_eq!(series.len(), 1);
    }

    #[test]
    fn many_rows_stay_ordered() {
        let series = series_of(300);
        assert_eq!(series.len(), 300);
        assert!(series.first().timestamp < series.last().timestamp);
    }

    #[test]
    fn aggregate_exact_division() {
        let series = series_of(90);
        let bars = aggregate(&series, 30).unwrap();
        assert_eq!(bars.len(), 3);
        for bar in &bars {
            assert_eq!(bar.minutes().len(), 30);
        }
    }

    #[test]
    fn aggregate_drops_trailing_partial_group() {
        let series = series_of(95);
        let bars = aggregate(&series, 30).unwrap();
        assert_eq!(bars.len(), 3);
    }

    #[test]
    fn aggregate_high_is_max_of_constituents() {
        let start = dt("2020-05-18T09:01");
        let highs = [10.0, 12.0, 11.0];
        let bars: Vec<MinuteBar> = highs
            .iter()
            .enumerate()
            .map(|(i, &h)| MinuteBar {
                timestamp: start + Duration::minutes(i as i64),
                open: 9.0,
                high: h,
                low: 8.0,
                close: 9.5,
                volume: 1.0,
            })
            .collect();
        let series = BarSeries::try_new(bars).unwrap();
        let agg = aggregate(&series, 3).unwrap();
        assert_eq!(agg[0].high(), 12.0);
        assert_eq!(agg[0].low(), 8.0);
        assert_eq!(agg[0].open(), 9.0);
        assert_eq!(agg[0].close(), 9.5);
    }

    #[test]
    fn aggregate_rejects_zero_period_and_short_series() {
        let series = series_of(10);
        assert!(matches!(aggregate(&series, 0), Err(DataError::BadPeriod)));
        assert!(matches!(
            aggregate(&series, 11),
            Err(DataError::SeriesTooShort {
                got: 10,
                period: 11
            })
        ));
    }

    #[test]
    fn aggregate_roundtrips_consumed_prefix() {
        let series = series_of(95);
        let bars = aggregate(&series, 30).unwrap();
        let flattened: Vec<MinuteBar> = bars.iter().flat_map(|b| b.minutes().to_vec()).collect();
        assert_eq!(flattened.as_slice(), &series.as_slice()[..90]);
        for bar in &bars {
            let sum: f64 = bar.minutes().iter().map(|m| m.volume).sum();
            assert!((bar.volume() - sum).abs() <= 1e-9 * sum.abs().max(1.0));
        }
    }

    /// 24h-per-day synthetic series spanning enough calendar days for the
    /// schedule tests.
    fn daily_series(days: i64) -> BarSeries {
        let start = dt("2020-05-18T09:00");
        let bars = (0..days * 24 * 60)
            .map(|i| MinuteBar {
                timestamp: start + Duration::minutes(i),
                open: 100.0,
                high: 101.0,
                low: 99.0,
                close: 100.0,
                volume: 1.0,
            })
            .collect();
        BarSeries::try_new(bars).unwrap()
    }

    #[test]
    fn schedule_windows_are_contiguous() {
        let series = daily_series(140);
        let windows = make_schedule(&series, 105, 14, 2).unwrap();
        assert_eq!(windows.len(), 2);
        for w in &windows {
            assert_eq!(w.train_end, w.test_start);
        }
        assert_eq!(windows[0].test_end, windows[1].test_start);
    }

    #[test]
    fn schedule_matches_published_futures_dates() {
        // A series starting 2020-05-18 with a 105-day training span puts the
        // first test window at 2020-08-31 and the second at 2020-09-14.
        let series = daily_series(200);
        let windows = make_schedule(&series, 105, 14, 6).unwrap();
        assert_eq!(windows[0].test_start, dt("2020-08-31T09:00"));
        assert_eq!(windows[1].test_start, dt("2020-09-14T09:00"));
        assert_eq!(windows[0].train_start, dt("2020-05-18T09:00"));
    }

    #[test]
    fn schedule_count_zero_is_empty() {
        let series = daily_series(10);
        assert!(make_schedule(&series, 105, 14, 0).unwrap().is_empty());
    }

    #[test]
    fn schedule_rejects_insufficient_data() {
        let series = daily_series(100);
        assert!(matches!(
            make_schedule(&series, 105, 14, 2),
            Err(DataError::InsufficientSpan { .. })
        ));
    }

    #[test]
    fn schedule_never_leaks_test_into_train() {
        let series = daily_series(150);
        for w in make_schedule(&series, 100, 10, 4).unwrap() {
            for m in series.iter() {
                assert!(!(w.contains_in_test(m.timestamp) && w.contains_in_train(m.timestamp)));
            }
        }
    }
}
