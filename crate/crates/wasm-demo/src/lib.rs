//! Interactive browser demo over the core pipeline.
//!
//! Three operations, each driven by sliders on the demo page: render one
//! volume-extended candlestick window as RGBA pixels, cluster every window of
//! a synthetic series on the output lattice, and run a mini walk-forward
//! backtest that returns its equity curve. Everything is deterministic in the
//! seed, so the page is fully explorable.

use wasm_bindgen::prelude::*;

use klinesom_core::chart::{render_window, ChartGeometry};
use klinesom_core::dfsom::{DfsomConfig, DfsomModel};
use klinesom_core::fsom::DEFAULT_EPSILON;
use klinesom_core::gru::{train_models, GruHyper, TrainingWindow};
use klinesom_core::hog::HogConfig;
use klinesom_core::market_data::{aggregate, AggBar};
use klinesom_core::pipeline::Normalizer;
use klinesom_core::synth::{generate_series, SynthConfig};
use klinesom_core::trading::{decide, report, simulate, SignalEvent};

const MINUTES_PER_DAY: usize = 120;
const PERIOD: usize = 30;
const WINDOW_BARS: usize = 10;
const IMAGE_ROWS: usize = 48;

fn synth_bars(seed: u32, days: u32, trend: f64, amplitude: f64, noise: f64) -> Vec<AggBar> {
    let series = generate_series(&SynthConfig {
        days: days.clamp(10, 120) as usize,
        minutes_per_day: MINUTES_PER_DAY,
        base_price: 4000.0,
        trend_per_day: trend,
        sine_amplitude: amplitude,
        sine_period_minutes: 900.0,
        noise,
        base_volume: 120.0,
        seed: seed as u64,
        ..SynthConfig::default()
    });
    aggregate(&series, PERIOD).expect("series longer than one period")
}

fn geometry() -> ChartGeometry {
    ChartGeometry {
        rows: IMAGE_ROWS,
        window_bars: WINDOW_BARS,
    }
}

fn demo_dfsom_config(seed: u32) -> DfsomConfig {
    DfsomConfig {
        layer_hog: vec![HogConfig::fine(), HogConfig::coarse()],
        layer_grid: (6, 6),
        output_grid: (4, 4),
        epsilon: 1e-3_f64.max(DEFAULT_EPSILON),
        max_iter: 12,
        seed: seed as u64,
    }
}

/// One rendered candlestick window as RGBA pixels (row 0 is the highest
/// price, ready for putImageData).
#[wasm_bindgen(getter_with_clone)]
pub struct ChartView {
    pub width: u32,
    pub height: u32,
    pub window_count: u32,
    pub price_min: f64,
    pub price_max: f64,
    pub start_label: String,
    pub rgba: Vec<u8>,
}

#[wasm_bindgen]
pub fn chart_view(
    seed: u32,
    days: u32,
    trend: f64,
    amplitude: f64,
    noise: f64,
    window: u32,
) -> ChartView {
    let bars = synth_bars(seed, days, trend, amplitude, noise);
    let count = bars.len() - WINDOW_BARS + 1;
    let index = (window as usize).min(count - 1);
    let slice = &bars[index..index + WINDOW_BARS];
    let image = render_window(slice, &geometry()).expect("window of the right size");
    let mut rgba = Vec::with_capacity(image.rows() * image.cols() * 4);
    for display_row in 0..image.rows() {
        let row = image.rows() - 1 - display_row; // price rises upward
        for col in 0..image.cols() {
            for channel in [&image.red, &image.green, &image.blue] {
                rgba.push((channel.get(row, col).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
            rgba.push(255);
        }
    }
    ChartView {
        width: image.cols() as u32,
        height: image.rows() as u32,
        window_count: count as u32,
        price_min: image.price_min,
        price_max: image.price_max,
        start_label: slice[0].start_time().format("%Y-%m-%d %H:%M").to_string(),
        rgba,
    }
}

/// Output-lattice statistics after clustering every window of the series.
#[wasm_bindgen(getter_with_clone)]
pub struct ClusterView {
    pub output_rows: u32,
    pub output_cols: u32,
    pub window_count: u32,
    pub output_iterations: u32,
    /// Windows assigned to each output neuron, row-major.
    pub hits: Vec<u32>,
    /// Cluster id per window, in time order.
    pub assignments: Vec<u16>,
    pub layer_iterations: Vec<u32>,
}

#[wasm_bindgen]
pub fn cluster_view(seed: u32, days: u32, trend: f64, amplitude: f64, noise: f64) -> ClusterView {
    let bars = synth_bars(seed, days, trend, amplitude, noise);
    let geometry = geometry();
    let images: Vec<_> = (0..=bars.len() - WINDOW_BARS)
        .map(|i| render_window(&bars[i..i + WINDOW_BARS], &geometry).expect("window"))
        .collect();
    let config = demo_dfsom_config(seed);
    let (model, stats) = DfsomModel::train(&images, &config).expect("training succeeds");
    let mut hits = vec![0u32; model.cluster_count()];
    let assignments: Vec<u16> = images
        .iter()
        .map(|image| {
            let cluster = model.assign_cluster(image).expect("trained model");
            hits[cluster] += 1;
            cluster as u16
        })
        .collect();
    ClusterView {
        output_rows: config.output_grid.0 as u32,
        output_cols: config.output_grid.1 as u32,
        window_count: images.len() as u32,
        output_iterations: stats.output_report.iterations,
        hits,
        assignments,
        layer_iterations: stats.layer_reports.iter().map(|r| r.iterations).collect(),
    }
}

/// Mini walk-forward backtest outcome: the cumulative profit-rate curve plus
/// the headline indicators.
#[wasm_bindgen(getter_with_clone)]
pub struct BacktestView {
    pub pr_pct: f64,
    pub trades: u32,
    pub winners: u32,
    pub losers: u32,
    /// Accuracy in percent; NaN when no trade executed.
    pub accuracy_pct: f64,
    /// Cumulative PR (percent) sampled once per test bar.
    pub equity: Vec<f64>,
    pub test_bars: u32,
}

#[wasm_bindgen]
pub fn backtest_view(
    seed: u32,
    days: u32,
    trend: f64,
    amplitude: f64,
    noise: f64,
    rate_bp: f64,
    fee_bp: f64,
) -> BacktestView {
    let bars = synth_bars(seed, days, trend, amplitude, noise);
    let geometry = geometry();
    // Two-thirds train, one-third test.
    let split = (bars.len() * 2 / 3).max(WINDOW_BARS + 2);
    let (train_bars, test_bars) = bars.split_at(split);

    let train_images: Vec<_> = (0..train_bars.len() - WINDOW_BARS)
        .map(|i| render_window(&train_bars[i..i + WINDOW_BARS], &geometry).expect("window"))
        .collect();
    let (model, _) = DfsomModel::train(&train_images, &demo_dfsom_config(seed)).expect("training");

    let normalizer = Normalizer::fit(train_bars.iter().map(AggBar::close));
    let supervised: Vec<TrainingWindow> = train_images
        .iter()
        .enumerate()
        .map(|(i, image)| TrainingWindow {
            cluster: model.assign_cluster(image).expect("trained model"),
            inputs: train_bars[i..i + WINDOW_BARS]
                .iter()
                .map(|b| vec![normalizer.norm(b.close())])
                .collect(),
            target: normalizer.norm(train_bars[i + WINDOW_BARS].close()),
        })
        .collect();
    let models = train_models(
        &supervised,
        &GruHyper {
            hidden_dim: 8,
            epochs: 60,
            learning_rate: 0.02,
            min_cluster_samples: 12,
            seed: seed as u64 + 1,
        },
    )
    .expect("training");

    let mut context: Vec<&AggBar> = train_bars[train_bars.len() - WINDOW_BARS..]
        .iter()
        .collect();
    context.extend(test_bars.iter());
    let rate = rate_bp / 10_000.0;
    let fee = fee_bp / 10_000.0;
    let mut events = Vec::with_capacity(test_bars.len());
    for (j, target_bar) in test_bars.iter().enumerate() {
        let history = &context[j..j + WINDOW_BARS];
        let slice: Vec<AggBar> = history.iter().map(|&b| b.clone()).collect();
        let image = render_window(&slice, &geometry).expect("window");
        let cluster = model.assign_cluster(&image).expect("trained model");
        let inputs: Vec<Vec<f64>> = history
            .iter()
            .map(|b| vec![normalizer.norm(b.close())])
            .collect();
        let predicted = normalizer.denorm(models.predict(cluster, &inputs).expect("prediction"));
        let close_t = history.last().expect("nonempty").close();
        events.push(SignalEvent {
            signal: decide(predicted, close_t, rate),
            entry_time: target_bar.start_time(),
            exit_time: target_bar.end_time(),
            entry_price: Some(target_bar.open()),
            exit_price: Some(target_bar.close()),
        });
    }
    let log = simulate(&events, fee).expect("events are time-ordered");
    let metrics = report(&log);

    let mut equity = Vec::with_capacity(test_bars.len());
    let mut running = 0.0;
    let mut trades = log.trades.iter().peekable();
    for event in &events {
        if let Some(trade) = trades.peek() {
            if trade.entry_time == event.entry_time {
                running += trade.net_return * 100.0;
                trades.next();
            }
        }
        equity.push(running);
    }

    BacktestView {
        pr_pct: metrics.pr_pct,
        trades: metrics.tn as u32,
        winners: metrics.tn_plus as u32,
        losers: metrics.tn_minus as u32,
        accuracy_pct: metrics.accuracy_pct.unwrap_or(f64::NAN),
        equity,
        test_bars: test_bars.len() as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_view_produces_pixels() {
        let view = chart_view(7, 12, 1.5, 60.0, 4.0, 3);
        assert_eq!(view.width, WINDOW_BARS as u32);
        assert_eq!(view.height, IMAGE_ROWS as u32);
        assert_eq!(view.rgba.len(), (view.width * view.height * 4) as usize);
        assert!(view.window_count > 0);
        assert!(view.price_max > view.price_min);
        // Some pixel is lit.
        assert!(view
            .rgba
            .chunks(4)
            .any(|px| px[0] > 0 || px[1] > 0 || px[2] > 0));
    }

    #[test]
    fn chart_view_clamps_the_window_index() {
        let view = chart_view(7, 12, 1.5, 60.0, 4.0, 10_000);
        assert!(view.window_count > 0);
    }

    #[test]
    fn cluster_view_accounts_for_every_window() {
        let view = cluster_view(7, 12, 1.5, 60.0, 4.0);
        assert_eq!(view.hits.len(), 16);
        assert_eq!(view.assignments.len(), view.window_count as usize);
        assert_eq!(view.hits.iter().sum::<u32>(), view.window_count);
    }

    #[test]
    fn backtest_view_is_deterministic() {
        let a = backtest_view(7, 15, 1.5, 60.0, 4.0, 10.0, 20.0);
        let b = backtest_view(7, 15, 1.5, 60.0, 4.0, 10.0, 20.0);
        assert_eq!(a.pr_pct, b.pr_pct);
        assert_eq!(a.equity, b.equity);
        assert_eq!(a.equity.len(), a.test_bars as usize);
        assert_eq!(a.trades, a.winners + a.losers);
    }
}
