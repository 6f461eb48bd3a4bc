//! Volume-extended candlestick images.
//!
//! A window of aggregated bars becomes three `rows x cols` channel matrices:
//! falling bars are drawn on the red channel, rising (or flat) bars on the
//! green channel, and per-price-level traded volume accumulates on the blue
//! channel. Bodies are written as 1.0 and shadows as 0.5; blue is rescaled to
//! a per-bar maximum of 1. Row 0 corresponds to the lowest price of the
//! window, row `rows-1` to the highest. The image is a feature tensor, not a
//! display artifact.

use std::io::{Read, Write};

use thiserror::Error;

use crate::market_data::AggBar;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("expected {expected} bars per window, got {got}")]
    WrongBarCount { expected: usize, got: usize },
    #[error("image needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("bar at column {0} has no constituent minutes")]
    EmptyBar(usize),
    #[error("malformed image bytes: {0}")]
    BadBytes(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output geometry of the rendered image. Defaults to 100 price rows over a
/// 10-bar window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChartGeometry {
    pub rows: usize,
    pub window_bars: usize,
}

impl Default for ChartGeometry {
    fn default() -> Self {
        Self {
            rows: 100,
            window_bars: 10,
        }
    }
}

/// Linear price-to-row mapping over the window's price range, rounding half
/// up and clipping into `0..rows`. A perfectly flat window maps everything to
/// the middle row.
#[derive(Debug, Clone, Copy)]
pub struct PriceMap {
    pub min: f64,
    pub max: f64,
    pub rows: usize,
}

impl PriceMap {
    pub fn row_of(&self, price: f64) -> usize {
        if self.max <= self.min {
            return self.rows / 2;
        }
        let frac = (price - self.min) / (self.max - self.min);
        let row = (self.rows as f64 * frac + 0.5).floor() as i64;
        row.clamp(0, self.rows as i64 - 1) as usize
    }
}

/// The rendered image: three channel matrices plus the price range mapped
/// onto the row axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleImage {
    pub red: Matrix,
    pub green: Matrix,
    pub blue: Matrix,
    pub price_min: f64,
    pub price_max: f64,
}

impl CandleImage {
    fn new(rows: usize, cols: usize, price_min: f64, price_max: f64) -> Self {
        Self {
            red: Matrix::zeros(rows, cols),
            green: Matrix::zeros(rows, cols),
            blue: Matrix::zeros(rows, cols),
            price_min,
            price_max,
        }
    }

    pub fn rows(&self) -> usize {
        self.red.rows()
    }

    pub fn cols(&self) -> usize {
        self.red.cols()
    }

    pub fn price_map(&self) -> PriceMap {
        PriceMap {
            min: self.price_min,
            max: self.price_max,
            rows: self.rows(),
        }
    }

    /// Flat binary layout for caching: rows/cols as u32, the price range,
    /// then the R, G, B channels row-major as little-endian f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ChartError> {
        w.write_all(&(self.rows() as u32).to_le_bytes())?;
        w.write_all(&(self.cols() as u32).to_le_bytes())?;
        w.write_all(&self.price_min.to_le_bytes())?;
        w.write_all(&self.price_max.to_le_bytes())?;
        for channel in [&self.red, &self.green, &self.blue] {
            for v in channel.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, ChartError> {
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let price_min = read_f64(&mut r)?;
        let price_max = read_f64(&mut r)?;
        let mut channels = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut data = vec![0.0f64; rows * cols];
            for v in data.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            channels.push(
                Matrix::from_vec(rows, cols, data)
                    .ok_or_else(|| ChartError::BadBytes("channel shape".into()))?,
            );
        }
        let blue = channels.pop().expect("three channels");
        let green = channels.pop().expect("three channels");
        let red = channels.pop().expect("three channels");
        Ok(Self {
            red,
            green,
            blue,
            price_min,
            price_max,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ChartError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, ChartError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Renders a window of `geometry.window_bars` aggregated bars into a
/// [`CandleImage`]. The price range is the union of the bars' lows and highs.
pub fn render_window(bars: &[AggBar], geometry: &ChartGeometry) -> Result<CandleImage, ChartError> {
    if bars.len() != geometry.window_bars {
        return Err(ChartError::WrongBarCount {
            expected: geometry.window_bars,
            got: bars.len(),
        });
    }
    if geometry.rows < 2 {
        return Err(ChartError::TooFewRows(geometry.rows));
    }
    for (col, bar) in bars.iter().enumerate() {
        if bar.minutes().is_empty() {
            return Err(ChartError::EmptyBar(col));
        }
    }
    let price_min = bars.iter().map(AggBar::low).fold(f64::INFINITY, f64::min);
    let price_max = bars
        .iter()
        .map(AggBar::high)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut image = CandleImage::new(geometry.rows, bars.len(), price_min, price_max);
    for (col, bar) in bars.iter().enumerate() {
        draw_kline(&mut image, bar, col);
        paint_volume(&mut image, bar, col);
    }
    Ok(image)
}

/// Draws one K-line into its column: shadows at 0.5 between body and the
/// high/low extremes, then the body at 1.0 over the open/close span. Shadows
/// are painted first so the body keeps 1.0 where the inclusive ranges meet.
pub fn draw_kline(image: &mut CandleImage, bar: &AggBar, column: usize) {
    let map = image.price_map();
    let open = map.row_of(bar.open());
    let close = map.row_of(bar.close());
    let high = map.row_of(bar.high());
    let low = map.row_of(bar.low());
    let channel = if bar.is_falling() {
        &mut image.red
    } else {
        &mut image.green
    };
    let (body_lo, body_hi) = (open.min(close), open.max(close));
    fill_rows(channel, body_hi, high, column, 0.5);
    fill_rows(channel, low, body_lo, column, 0.5);
    fill_rows(channel, body_lo, body_hi, column, 1.0);
}

/// Spreads each constituent minute's volume evenly over the rows of its
/// price span, then rescales the column so its maximum is exactly 1. A bar
/// with zero total volume leaves the column untouched.
pub fn paint_volume(image: &mut CandleImage, bar: &AggBar, column: usize) {
    let map = image.price_map();
    for minute in bar.minutes() {
        let lo = map.row_of(minute.low);
        let hi = map.row_of(minute.high);
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let span = (hi - lo + 1) as f64;
        for row in lo..=hi {
            image.blue.add(row, column, minute.volume / span);
        }
    }
    let max = image.blue.column_max(column);
    if max > 0.0 {
        // Divide rather than multiply by a reciprocal so the column max is
        // exactly 1.
        for row in 0..image.blue.rows() {
            let v = image.blue.get(row, column);
            image.blue.set(row, column, v / max);
        }
    }
}

fn fill_rows(channel: &mut Matrix, from: usize, to: usize, column: usize, value: f64) {
    let (lo, hi) = (from.min(to), from.max(to));
    for row in lo..=hi {
        channel.set(row, column, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{BarSeries, MinuteBar};
    use chrono::{Duration, NaiveDateTime};

    fn dt(i: i64) -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2020-05-18T09:00", "%Y-%m-%dT%H:%M").unwrap()
            + Duration::minutes(i)
    }

    fn minute(i: i64, open: f64, high: f64, low: f64, close: f64, volume: f64) -> MinuteBar {
        MinuteBar {
            timestamp: dt(i),
            open,
            high,
            low,
            close,
            volume,
        }
    }

    fn bar_one_minute(i: i64, open: f64, high: f64, low: f64, close: f64, volume: f64) -> AggBar {
        AggBar::from_minutes(vec![minute(i, open, high, low, close, volume)]).unwrap()
    }

    fn flat_bar(i: i64, price: f64) -> AggBar {
        bar_one_minute(i, price, price, price, price, 5.0)
    }

    #[test]
    fn price_map_matches_hand_computed_rows() {
        // round(100 * (p - 7) / 4) clipped to 0..=99
        let map = PriceMap {
            min: 7.0,
            max: 11.0,
            rows: 100,
        };
        for (price, want) in [(7.0, 0), (8.0, 25), (10.0, 75), (11.0, 99)] {
            assert_eq!(map.row_of(price), want, "price {price}");
        }
    }

    #[test]
    fn falling_bar_draws_red_body_and_shadows() {
        // open=10, close=8, high=11, low=7 over the range [7, 11]:
        // body rows 25..=75 at 1.0, shadows 0..=24 and 76..=99 at 0.5.
        let bars: Vec<AggBar> = (0..10)
            .map(|i| {
                if i == 0 {
                    bar_one_minute(i, 10.0, 11.0, 7.0, 8.0, 3.0)
                } else {
                    bar_one_minute(i, 9.0, 11.0, 7.0, 9.5, 1.0)
                }
            })
            .collect();
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        assert_eq!(image.price_min, 7.0);
        assert_eq!(image.price_max, 11.0);
        for row in 0..100 {
            let want = if (25..=75).contains(&row) { 1.0 } else { 0.5 };
            assert_eq!(image.red.get(row, 0), want, "red row {row}");
            assert_eq!(image.green.get(row, 0), 0.0, "green row {row}");
        }
    }

    #[test]
    fn rising_bar_leaves_red_untouched() {
        let bars: Vec<AggBar> = (0..10)
            .map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0, 3.0))
            .collect();
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        for row in 0..100 {
            assert_eq!(image.red.get(row, 3), 0.0);
        }
        assert_eq!(image.green.get(50, 3), 1.0);
    }

    #[test]
    fn doji_body_is_one_row_without_shadows() {
        let mut bars: Vec<AggBar> = (0..9)
            .map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0, 3.0))
            .collect();
        bars.push(flat_bar(9, 9.0));
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        let map = image.price_map();
        let row = map.row_of(9.0);
        for r in 0..100 {
            let want = if r == row { 1.0 } else { 0.0 };
            assert_eq!(image.green.get(r, 9), want, "row {r}");
        }
    }

    #[test]
    fn flat_window_collapses_to_middle_row() {
        let bars: Vec<AggBar> = (0..10).map(|i| flat_bar(i, 42.0)).collect();
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        for col in 0..10 {
            assert_eq!(image.green.get(50, col), 1.0);
            assert_eq!(image.blue.get(50, col), 1.0);
            for row in 0..100 {
                if row != 50 {
                    assert_eq!(image.green.get(row, col), 0.0);
                    assert_eq!(image.blue.get(row, col), 0.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_minute_span_lands_on_one_row() {
        // One minute trading a single price gets its whole volume on one row.
        let minutes = vec![
            minute(0, 9.0, 9.0, 9.0, 9.0, 7.0),
            minute(1, 9.5, 10.0, 9.0, 10.0, 0.0),
        ];
        let bar = AggBar::from_minutes(minutes).unwrap();
        let mut bars: Vec<AggBar> = vec![bar];
        bars.extend((1..10).map(|i| bar_one_minute(i + 1, 8.0, 11.0, 7.0, 10.0, 3.0)));
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        let row = image.price_map().row_of(9.0);
        assert_eq!(image.blue.get(row, 0), 1.0);
    }

    #[test]
    fn equal_volumes_over_equal_spans_paint_equal_intensity() {
        let minutes = vec![
            minute(0, 8.0, 8.4, 8.0, 8.4, 6.0),
            minute(1, 10.0, 10.4, 10.0, 10.4, 6.0),
        ];
        let bar = AggBar::from_minutes(minutes).unwrap();
        let mut bars = vec![bar];
        bars.extend((1..10).map(|i| bar_one_minute(i + 1, 8.0, 11.0, 7.0, 10.0, 3.0)));
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        let map = image.price_map();
        let a = image.blue.get(map.row_of(8.2), 0);
        let b = image.blue.get(map.row_of(10.2), 0);
        assert!(a > 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_volume_bar_keeps_blue_empty() {
        let mut bars: Vec<AggBar> = vec![bar_one_minute(0, 8.0, 11.0, 7.0, 10.0, 0.0)];
        bars.extend((1..10).map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0, 3.0)));
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        for row in 0..100 {
            assert_eq!(image.blue.get(row, 0), 0.0);
        }
    }

    #[test]
    fn channel_exclusivity_and_blue_normalization_hold() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let bars: Vec<AggBar> = (0..10)
                .map(|i| {
                    let base = 50.0 + next() * 10.0;
                    let open = base + next();
                    let close = base + next();
                    let high = open.max(close) + next();
                    let low = (open.min(close) - next()).max(1.0);
                    let minutes = vec![
                        minute(i * 2, open, high, low, (open + close) / 2.0, next() * 10.0),
                        minute(
                            i * 2 + 1,
                            (open + close) / 2.0,
                            high,
                            low,
                            close,
                            next() * 10.0,
                        ),
                    ];
                    AggBar::from_minutes(minutes).unwrap()
                })
                .collect();
            let image = render_window(&bars, &ChartGeometry::default()).unwrap();
            for col in 0..10 {
                let red_max = (0..100).map(|r| image.red.get(r, col)).fold(0.0, f64::max);
                let green_max = (0..100)
                    .map(|r| image.green.get(r, col))
                    .fold(0.0, f64::max);
                assert!(
                    red_max == 0.0 || green_max == 0.0,
                    "column {col} has both red and green"
                );
                let blue_max = (0..100).map(|r| image.blue.get(r, col)).fold(0.0, f64::max);
                assert_eq!(blue_max, 1.0, "column {col} blue max");
                // Body rows sit between the shadow extremes.
                let channel = if red_max > 0.0 {
                    &image.red
                } else {
                    &image.green
                };
                let body_rows: Vec<usize> =
                    (0..100).filter(|&r| channel.get(r, col) == 1.0).collect();
                let touched: Vec<usize> = (0..100).filter(|&r| channel.get(r, col) > 0.0).collect();
                assert!(!body_rows.is_empty());
                assert!(body_rows.first() >= touched.first());
                assert!(body_rows.last() <= touched.last());
            }
        }
    }

    #[test]
    fn identical_inputs_render_identical_images() {
        let bars: Vec<AggBar> = (0..10)
            .map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0, 3.0))
            .collect();
        let a = render_window(&bars, &ChartGeometry::default()).unwrap();
        let b = render_window(&bars, &ChartGeometry::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_bar_count_is_rejected() {
        let bars: Vec<AggBar> = (0..9)
            .map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0, 3.0))
            .collect();
        assert!(matches!(
            render_window(&bars, &ChartGeometry::default()),
            Err(ChartError::WrongBarCount {
                expected: 10,
                got: 9
            })
        ));
    }

    #[test]
    fn binary_roundtrip_is_exact() {
        let bars: Vec<AggBar> = (0..10)
            .map(|i| bar_one_minute(i, 8.0, 11.0, 7.0, 10.0 + i as f64 * 0.01, 3.0))
            .collect();
        let image = render_window(&bars, &ChartGeometry::default()).unwrap();
        let mut bytes = Vec::new();
        image.write_to(&mut bytes).unwrap();
        let back = CandleImage::read_from(bytes.as_slice()).unwrap();
        assert_eq!(image, back);
    }

    #[test]
    fn series_to_images_pipeline() {
        let start = dt(0);
        let bars: Vec<MinuteBar> = (0..300)
            .map(|i| {
                let p = 100.0 + (i as f64 * 0.1).sin() * 2.0;
                MinuteBar {
                    timestamp: start + Duration::minutes(i),
                    open: p,
                    high: p + 0.5,
                    low: p - 0.5,
                    close: p + 0.2,
                    volume: 10.0,
                }
            })
            .collect();
        let series = BarSeries::try_new(bars).unwrap();
        let agg = crate::market_data::aggregate(&series, 30).unwrap();
        let image = render_window(&agg[..10], &ChartGeometry::default()).unwrap();
        assert_eq!(image.rows(), 100);
        assert_eq!(image.cols(), 10);
    }
}
