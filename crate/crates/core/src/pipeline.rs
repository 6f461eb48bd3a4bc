//! End-to-end walk-forward pipeline: ingest, schedule, render, extract,
//! cluster, predict, trade, report.
//!
//! Each walk-forward window retrains the clustering model and the per-cluster
//! predictors from scratch on its training range, then decides and fills one
//! trade per test bar. Reports, trade logs, predictions, an equity curve and
//! a manifest land in the output directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{render_window, CandleImage, ChartGeometry};
use crate::dfsom::{DfsomConfig, DfsomModel, DfsomTrainStats};
use crate::gru::{train_models, GruHyper, TrainingWindow};
use crate::hog::HogConfig;
use crate::market_data::{
    aggregate, make_schedule, parse_minute_bars, AggBar, BarSeries, DataError, ParseOptions,
    SplitWindow,
};
use crate::trading::{decide, report, simulate, MetricsReport, SignalEvent, TradingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("window {window} has too few bars ({got}) for a {needed}-bar window plus target")]
    WindowTooSmall {
        window: usize,
        got: usize,
        needed: usize,
    },
    #[error("window {window} leaks training data into its test range")]
    LeakageDetected { window: usize },
    #[error("window {window}, stage {stage}: {message}")]
    Stage {
        window: usize,
        stage: &'static str,
        message: String,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    fn stage(window: usize, stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self::Stage {
            window,
            stage,
            message: err.to_string(),
        }
    }

    /// True for failures of numeric origin (divergence, non-finite values).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Self::Stage { message, .. } if message.contains("non-finite") || message.contains("diverged"))
    }
}

/// Full run configuration. Every default matches the published experimental
/// setup, so an empty override file reproduces it.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub chart: ChartSection,
    pub hog: HogSection,
    pub fsom: FsomSection,
    pub gru: GruSection,
    pub trading: TradingSection,
    pub schedule: ScheduleSection,
    pub seeds: SeedSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub path: PathBuf,
    pub delimiter: char,
    pub has_header: bool,
    pub timestamp_format: String,
    /// Aggregation period in minutes: 30 for the futures setup, 60 for forex.
    pub period_minutes: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            delimiter: ',',
            has_header: false,
            timestamp_format: "%Y-%m-%dT%H:%M".to_string(),
            period_minutes: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartSection {
    pub rows: usize,
    pub window_bars: usize,
}

impl Default for ChartSection {
    fn default() -> Self {
        Self {
            rows: 100,
            window_bars: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HogSection {
    /// One (window_side, stride, bins) triple per parallel layer.
    pub layers: Vec<HogLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HogLayer {
    pub window_side: usize,
    pub stride: usize,
    pub bins: usize,
}

impl Default for HogLayer {
    fn default() -> Self {
        Self {
            window_side: 3,
            stride: 1,
            bins: 9,
        }
    }
}

impl Default for HogSection {
    fn default() -> Self {
        Self {
            layers: vec![
                HogLayer {
                    window_side: 3,
                    stride: 1,
                    bins: 9,
                },
                HogLayer {
                    window_side: 6,
                    stride: 2,
                    bins: 9,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FsomSection {
    pub layer_rows: usize,
    pub layer_cols: usize,
    pub output_rows: usize,
    pub output_cols: usize,
    pub epsilon: f64,
    pub max_iter: u32,
}

impl Default for FsomSection {
    fn default() -> Self {
        Self {
            layer_rows: 15,
            layer_cols: 15,
            output_rows: 8,
            output_cols: 8,
            epsilon: crate::fsom::DEFAULT_EPSILON,
            max_iter: crate::fsom::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GruSection {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_cluster_samples: usize,
}

impl Default for GruSection {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            epochs: 200,
            learning_rate: 1e-2,
            min_cluster_samples: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TradingSection {
    /// The fix rate that sets the long/short thresholds around the close.
    pub threshold_rate: f64,
    /// Flat round-trip fee: 0.2% for the futures setup, 0.1% for forex.
    pub fee_rate: f64,
}

impl Default for TradingSection {
    fn default() -> Self {
        Self {
            threshold_rate: 0.001,
            fee_rate: 0.002,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleSection {
    pub train_days: i64,
    pub test_days: i64,
    pub count: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            train_days: 105,
            test_days: 14,
            count: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedSection {
    pub fsom: u64,
    pub gru: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self { fsom: 1, gru: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Cache trained clustering models keyed by config and data content.
    pub cache: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            cache: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.data.period_minutes == 0 {
            return Err(PipelineError::Config(
                "period_minutes must be positive".into(),
            ));
        }
        if self.chart.rows < 2 || self.chart.window_bars == 0 {
            return Err(PipelineError::Config("chart geometry too small".into()));
        }
        if self.hog.layers.is_empty() {
            return Err(PipelineError::Config(
                "at least one HOG layer required".into(),
            ));
        }
        for layer in &self.hog.layers {
            if layer.window_side == 0 || layer.stride == 0 || layer.bins == 0 {
                return Err(PipelineError::Config(
                    "HOG layer fields must be positive".into(),
                ));
            }
            if layer.window_side > self.chart.rows.min(self.chart.window_bars) {
                return Err(PipelineError::Config(format!(
                    "HOG window {} exceeds the {}x{} image",
                    layer.window_side, self.chart.rows, self.chart.window_bars
                )));
            }
        }
        if self.fsom.layer_rows * self.fsom.layer_cols == 0
            || self.fsom.output_rows * self.fsom.output_cols == 0
        {
            return Err(PipelineError::Config("SOM grids must be non-empty".into()));
        }
        if self.fsom.epsilon <= 0.0 || self.fsom.max_iter == 0 {
            return Err(PipelineError::Config(
                "convergence settings must be positive".into(),
            ));
        }
        if self.gru.hidden_dim == 0 || self.gru.epochs == 0 || self.gru.learning_rate <= 0.0 {
            return Err(PipelineError::Config(
                "GRU hyperparameters must be positive".into(),
            ));
        }
        if self.schedule.train_days <= 0 || self.schedule.test_days <= 0 {
            return Err(PipelineError::Config(
                "schedule spans must be positive".into(),
            ));
        }
        if self.trading.threshold_rate < 0.0 || self.trading.fee_rate < 0.0 {
            return Err(PipelineError::Config("rates must be non-negative".into()));
        }
        Ok(())
    }

    pub fn chart_geometry(&self) -> ChartGeometry {
        ChartGeometry {
            rows: self.chart.rows,
            window_bars: self.chart.window_bars,
        }
    }

    pub fn dfsom_config(&self) -> Result<DfsomConfig, PipelineError> {
        let layer_hog = self
            .hog
            .layers
            .iter()
            .map(|l| HogConfig::new(l.bins, l.window_side, l.stride))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(DfsomConfig {
            layer_hog,
            layer_grid: (self.fsom.layer_rows, self.fsom.layer_cols),
            output_grid: (self.fsom.output_rows, self.fsom.output_cols),
            epsilon: self.fsom.epsilon,
            max_iter: self.fsom.max_iter,
            seed: self.seeds.fsom,
        })
    }

    pub fn gru_hyper(&self) -> GruHyper {
        GruHyper {
            hidden_dim: self.gru.hidden_dim,
            epochs: self.gru.epochs,
            learning_rate: self.gru.learning_rate,
            min_cluster_samples: self.gru.min_cluster_samples,
            seed: self.seeds.gru,
        }
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            delimiter: self.data.delimiter,
            has_header: self.data.has_header,
            timestamp_format: self.data.timestamp_format.clone(),
        }
    }

    /// FNV-1a hash of the canonical JSON form, hex-encoded. Identical
    /// configurations always hash identically.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Min-max normalizer fitted on the training closes of one window and applied
/// unchanged to its test range.
#[derive(Debug, Clone, Copy)]
pub struct Normalizer {
    min: f64,
    max: f64,
}

impl Normalizer {
    pub fn fit(values: impl Iterator<Item = f64>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }

    pub fn norm(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.5
        }
    }

    pub fn denorm(&self, v: f64) -> f64 {
        if self.max > self.min {
            v * (self.max - self.min) + self.min
        } else {
            self.min
        }
    }
}

/// Per-window facts recorded for reproducibility and the leakage check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowManifest {
    pub index: usize,
    pub train_start: NaiveDateTime,
    pub train_end: NaiveDateTime,
    pub test_start: NaiveDateTime,
    pub test_end: NaiveDateTime,
    /// Last minute of data used for training.
    pub max_train_timestamp: NaiveDateTime,
    /// First minute of data in the test range.
    pub min_test_timestamp: NaiveDateTime,
    pub train_bars: usize,
    pub test_bars: usize,
    pub train_images: usize,
    pub layer_iterations: Vec<u32>,
    pub output_iterations: u32,
    pub dedicated_gru_models: usize,
    pub trades: usize,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: SeedSection,
    pub windows: Vec<WindowManifest>,
    pub timings_ms: BTreeMap<String, u128>,
}

/// One report row: the window's metrics plus the running cumulative PR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub window: usize,
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub sumpr_pct: f64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<ReportRow>,
    pub sumpr_pct: f64,
    pub manifest: Manifest,
}

/// Everything produced for one walk-forward window.
struct WindowOutcome {
    metrics: MetricsReport,
    trades: crate::trading::TradeLog,
    predictions: Vec<PredictionRecord>,
    equity: Vec<(NaiveDateTime, f64)>,
    manifest: WindowManifest,
    gru_loss_csv: Vec<u8>,
}

/// A test-range prediction with the prices the backtest needs; this is the
/// row format of `predictions_window_*.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub decision_time: NaiveDateTime,
    pub close_t: f64,
    pub predicted_next_close: f64,
    pub entry_time: NaiveDateTime,
    pub entry_price: f64,
    pub exit_time: NaiveDateTime,
    pub exit_price: f64,
}

/// Runs the full pipeline as configured and writes all artifacts under
/// `config.output.dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let total_timer = Instant::now();
    let mut timings: BTreeMap<String, u128> = BTreeMap::new();

    let ingest_timer = Instant::now();
    let file = File::open(&config.data.path).map_err(|e| {
        PipelineError::Data(DataError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", config.data.path.display()),
        )))
    })?;
    let series = parse_minute_bars(BufReader::new(file), &config.parse_options())?;
    let bars = aggregate(&series, config.data.period_minutes)?;
    timings.insert("ingest".into(), ingest_timer.elapsed().as_millis());

    let windows = make_schedule(
        &series,
        config.schedule.train_days,
        config.schedule.test_days,
        config.schedule.count,
    )?;

    run_over_windows(config, &bars, &windows, timings, total_timer)
}

/// The pipeline body over pre-aggregated bars; split out so tests and the
/// demo surfaces can drive it without touching the filesystem for input.
pub fn run_pipeline_on_series(
    config: &PipelineConfig,
    series: &BarSeries,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let total_timer = Instant::now();
    let bars = aggregate(series, config.data.period_minutes)?;
    let windows = make_schedule(
        series,
        config.schedule.train_days,
        config.schedule.test_days,
        config.schedule.count,
    )?;
    run_over_windows(config, &bars, &windows, BTreeMap::new(), total_timer)
}

fn run_over_windows(
    config: &PipelineConfig,
    bars: &[AggBar],
    windows: &[SplitWindow],
    mut timings: BTreeMap<String, u128>,
    total_timer: Instant,
) -> Result<RunSummary, PipelineError> {
    let out_dir = &config.output.dir;
    fs::create_dir_all(out_dir)?;

    let mut rows = Vec::with_capacity(windows.len());
    let mut window_manifests = Vec::with_capacity(windows.len());
    let mut equity: Vec<(NaiveDateTime, f64)> = Vec::new();
    let mut sumpr = 0.0f64;

    for window in windows {
        let timer = Instant::now();
        let outcome = run_window(config, bars, window, sumpr)?;
        let elapsed = timer.elapsed();
        timings.insert(format!("window_{}", window.index), elapsed.as_millis());
        log::info!("window {} finished in {elapsed:?}", window.index);
        log::info!(
            "window {}: {} trades, PR {:+.3}%, SOM iterations {:?}/{}",
            window.index,
            outcome.metrics.tn,
            outcome.metrics.pr_pct,
            outcome.manifest.layer_iterations,
            outcome.manifest.output_iterations,
        );

        sumpr += outcome.metrics.pr_pct;
        rows.push(ReportRow {
            window: window.index,
            metrics: outcome.metrics.clone(),
            sumpr_pct: sumpr,
        });
        equity.extend(outcome.equity.iter().copied());

        let trades_path = out_dir.join(format!("trades_window_{}.csv", window.index));
        let mut w = BufWriter::new(File::create(trades_path)?);
        outcome
            .trades
            .write_csv(&mut w)
            .map_err(|e| PipelineError::stage(window.index, "trades", e))?;

        write_predictions(
            &out_dir.join(format!("predictions_window_{}.csv", window.index)),
            &outcome.predictions,
        )?;
        fs::write(
            out_dir.join(format!("gru_loss_window_{}.csv", window.index)),
            &outcome.gru_loss_csv,
        )?;

        window_manifests.push(outcome.manifest);
    }

    let report_timer = Instant::now();
    emit_report(&rows, out_dir)?;
    write_equity_curve(&out_dir.join("equity_curve.csv"), &equity)?;
    timings.insert("reports".into(), report_timer.elapsed().as_millis());
    timings.insert("total".into(), total_timer.elapsed().as_millis());

    let manifest = Manifest {
        config_hash: config.content_hash(),
        seeds: config.seeds.clone(),
        windows: window_manifests,
        timings_ms: timings,
    };
    let manifest_file = File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(manifest_file), &manifest)
        .map_err(|e| PipelineError::Config(format!("manifest serialization: {e}")))?;

    Ok(RunSummary {
        rows,
        sumpr_pct: sumpr,
        manifest,
    })
}

fn run_window(
    config: &PipelineConfig,
    bars: &[AggBar],
    window: &SplitWindow,
    sumpr_before: f64,
) -> Result<WindowOutcome, PipelineError> {
    let geometry = config.chart_geometry();
    let window_bars = geometry.window_bars;

    // A bar belongs to a range only when it fits entirely inside it.
    let train_bars: Vec<&AggBar> = bars
        .iter()
        .filter(|b| b.start_time() >= window.train_start && b.end_time() < window.train_end)
        .collect();
    let test_bars: Vec<&AggBar> = bars
        .iter()
        .filter(|b| b.start_time() >= window.test_start && b.end_time() < window.test_end)
        .collect();
    if train_bars.len() < window_bars + 1 {
        return Err(PipelineError::WindowTooSmall {
            window: window.index,
            got: train_bars.len(),
            needed: window_bars + 1,
        });
    }
    if test_bars.is_empty() {
        return Err(PipelineError::WindowTooSmall {
            window: window.index,
            got: 0,
            needed: 1,
        });
    }

    let max_train_ts = train_bars.last().expect("nonempty").end_time();
    let min_test_ts = test_bars.first().expect("nonempty").start_time();
    if max_train_ts >= min_test_ts {
        return Err(PipelineError::LeakageDetected {
            window: window.index,
        });
    }

    // Normalization is fitted on the training closes only.
    let normalizer = Normalizer::fit(train_bars.iter().map(|b| b.close()));

    // Train images and supervised windows: image i covers bars [i, i+W),
    // its target is the close of bar i+W.
    let mut train_images: Vec<CandleImage> = Vec::with_capacity(train_bars.len() - window_bars);
    for i in 0..=train_bars.len() - window_bars - 1 {
        let slice: Vec<AggBar> = train_bars[i..i + window_bars]
            .iter()
            .map(|&b| b.clone())
            .collect();
        train_images.push(
            render_window(&slice, &geometry)
                .map_err(|e| PipelineError::stage(window.index, "render", e))?,
        );
    }

    let (model, stats, cache_hit) = obtain_model(config, window, &train_bars, &train_images)?;

    let mut supervised: Vec<TrainingWindow> = Vec::with_capacity(train_images.len());
    for (i, image) in train_images.iter().enumerate() {
        let cluster = model
            .assign_cluster(image)
            .map_err(|e| PipelineError::stage(window.index, "cluster", e))?;
        let inputs: Vec<Vec<f64>> = train_bars[i..i + window_bars]
            .iter()
            .map(|b| vec![normalizer.norm(b.close())])
            .collect();
        supervised.push(TrainingWindow {
            cluster,
            inputs,
            target: normalizer.norm(train_bars[i + window_bars].close()),
        });
    }

    let models = train_models(&supervised, &config.gru_hyper())
        .map_err(|e| PipelineError::stage(window.index, "gru", e))?;
    let mut gru_loss_csv = Vec::new();
    models
        .write_loss_curves_csv(&mut gru_loss_csv)
        .map_err(|e| PipelineError::stage(window.index, "gru", e))?;

    // Test phase: the history window for test bar j ends right before it,
    // reaching back into the training tail for the first few bars.
    let mut context: Vec<&AggBar> = Vec::with_capacity(window_bars + test_bars.len());
    context.extend_from_slice(&train_bars[train_bars.len() - window_bars..]);
    context.extend_from_slice(&test_bars);

    let mut events = Vec::with_capacity(test_bars.len());
    let mut predictions = Vec::with_capacity(test_bars.len());
    let mut equity = Vec::with_capacity(test_bars.len());
    let mut running = 0.0f64;
    for (j, target_bar) in test_bars.iter().enumerate() {
        let history = &context[j..j + window_bars];
        let slice: Vec<AggBar> = history.iter().map(|&b| b.clone()).collect();
        let image = render_window(&slice, &geometry)
            .map_err(|e| PipelineError::stage(window.index, "render", e))?;
        let cluster = model
            .assign_cluster(&image)
            .map_err(|e| PipelineError::stage(window.index, "cluster", e))?;
        let inputs: Vec<Vec<f64>> = history
            .iter()
            .map(|b| vec![normalizer.norm(b.close())])
            .collect();
        let predicted = normalizer.denorm(
            models
                .predict(cluster, &inputs)
                .map_err(|e| PipelineError::stage(window.index, "predict", e))?,
        );
        let close_t = history.last().expect("nonempty").close();
        let signal = decide(predicted, close_t, config.trading.threshold_rate);
        events.push(SignalEvent {
            signal,
            entry_time: target_bar.start_time(),
            exit_time: target_bar.end_time(),
            entry_price: Some(target_bar.open()),
            exit_price: Some(target_bar.close()),
        });
        predictions.push(PredictionRecord {
            decision_time: history.last().expect("nonempty").end_time(),
            close_t,
            predicted_next_close: predicted,
            entry_time: target_bar.start_time(),
            entry_price: target_bar.open(),
            exit_time: target_bar.end_time(),
            exit_price: target_bar.close(),
        });
    }

    let trades = simulate(&events, config.trading.fee_rate)
        .map_err(|e| PipelineError::stage(window.index, "simulate", e))?;

    // Equity samples once per test bar, including flat ones.
    let mut trade_iter = trades.trades.iter().peekable();
    for (event, bar) in events.iter().zip(test_bars.iter()) {
        if let Some(trade) = trade_iter.peek() {
            if trade.entry_time == event.entry_time {
                running += trade.net_return * 100.0;
                trade_iter.next();
            }
        }
        equity.push((bar.end_time(), sumpr_before + running));
    }

    let metrics = report(&trades);
    let manifest = WindowManifest {
        index: window.index,
        train_start: window.train_start,
        train_end: window.train_end,
        test_start: window.test_start,
        test_end: window.test_end,
        max_train_timestamp: max_train_ts,
        min_test_timestamp: min_test_ts,
        train_bars: train_bars.len(),
        test_bars: test_bars.len(),
        train_images: train_images.len(),
        layer_iterations: stats.layer_reports.iter().map(|r| r.iterations).collect(),
        output_iterations: stats.output_report.iterations,
        dedicated_gru_models: models.models.len(),
        trades: trades.len(),
        cache_hit,
    };
    Ok(WindowOutcome {
        metrics,
        trades,
        predictions,
        equity,
        manifest,
        gru_loss_csv,
    })
}

/// Trains the clustering model, or loads it from the content-addressed cache
/// when enabled and the same config and training data were seen before.
fn obtain_model(
    config: &PipelineConfig,
    window: &SplitWindow,
    train_bars: &[&AggBar],
    train_images: &[CandleImage],
) -> Result<(DfsomModel, DfsomTrainStats, bool), PipelineError> {
    let dfsom_config = config.dfsom_config()?;
    let empty_stats = || DfsomTrainStats {
        layer_reports: Vec::new(),
        output_report: crate::fsom::FitReport {
            iterations: 0,
            final_delta: 0.0,
            converged: true,
        },
        layer_pool_sizes: Vec::new(),
    };

    let cache_path = if config.output.cache {
        let mut key =
            serde_json::to_vec(&(&config.chart, &config.hog, &config.fsom, config.seeds.fsom))
                .expect("key serializes");
        for bar in train_bars {
            key.extend_from_slice(bar.start_time().to_string().as_bytes());
            for v in [bar.open(), bar.high(), bar.low(), bar.close(), bar.volume()] {
                key.extend_from_slice(&v.to_le_bytes());
            }
        }
        let dir = config.output.dir.join("cache");
        fs::create_dir_all(&dir)?;
        Some(dir.join(format!("dfsom_{:016x}.bin", fnv1a(&key))))
    } else {
        None
    };

    if let Some(path) = &cache_path {
        if path.exists() {
            let file = File::open(path)?;
            let model = DfsomModel::read_from(BufReader::new(file))
                .map_err(|e| PipelineError::stage(window.index, "cache", e))?;
            log::info!(
                "window {}: clustering model loaded from cache",
                window.index
            );
            return Ok((model, empty_stats(), true));
        }
    }

    let (model, stats) = DfsomModel::train(train_images, &dfsom_config)
        .map_err(|e| PipelineError::stage(window.index, "dfsom", e))?;
    if let Some(path) = &cache_path {
        let file = File::create(path)?;
        model
            .write_to(BufWriter::new(file))
            .map_err(|e| PipelineError::stage(window.index, "cache", e))?;
    }
    Ok((model, stats, false))
}

fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "decision_time,close_t,predicted_next_close,entry_time,entry_price,exit_time,exit_price"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.decision_time,
            r.close_t,
            r.predicted_next_close,
            r.entry_time,
            r.entry_price,
            r.exit_time,
            r.exit_price
        )?;
    }
    Ok(())
}

/// Reads a predictions CSV produced by [`run_pipeline`]; the backtest command
/// replays threshold decisions from it without retraining.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(PipelineError::Config(format!(
                "predictions row {}: expected 7 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let ts = |s: &str| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
                .map_err(|e| PipelineError::Config(format!("predictions row {}: {e}", i + 1)))
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| PipelineError::Config(format!("predictions row {}: {e}", i + 1)))
        };
        out.push(PredictionRecord {
            decision_time: ts(fields[0])?,
            close_t: num(fields[1])?,
            predicted_next_close: num(fields[2])?,
            entry_time: ts(fields[3])?,
            entry_price: num(fields[4])?,
            exit_time: ts(fields[5])?,
            exit_price: num(fields[6])?,
        });
    }
    Ok(out)
}

/// Replays decisions over cached predictions with the given thresholds and
/// fee; the backtest command's core.
pub fn backtest_predictions(
    records: &[PredictionRecord],
    threshold_rate: f64,
    fee_rate: f64,
) -> Result<(crate::trading::TradeLog, MetricsReport), TradingError> {
    let events: Vec<SignalEvent> = records
        .iter()
        .map(|r| SignalEvent {
            signal: decide(r.predicted_next_close, r.close_t, threshold_rate),
            entry_time: r.entry_time,
            exit_time: r.exit_time,
            entry_price: Some(r.entry_price),
            exit_price: Some(r.exit_price),
        })
        .collect();
    let log = simulate(&events, fee_rate)?;
    let metrics = report(&log);
    Ok((log, metrics))
}

/// Serializes the nine indicators per window plus the cumulative column as
/// both CSV and JSON with cell-identical values.
pub fn emit_report(rows: &[ReportRow], dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let mut csv = String::new();
    csv.push_str(
        "window,pr_pct,sumpr_pct,tn,tn_plus,tn_minus,avg_return,avg_profit,avg_loss,pl_ratio,accuracy_pct\n",
    );
    for row in rows {
        let m = &row.metrics;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.window,
            m.pr_pct,
            row.sumpr_pct,
            m.tn,
            m.tn_plus,
            m.tn_minus,
            opt(m.avg_return),
            opt(m.avg_profit),
            opt(m.avg_loss),
            opt(m.pl_ratio),
            opt(m.accuracy_pct),
        ));
    }
    fs::write(dir.join("report.csv"), csv)?;

    let json_file = File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(json_file), rows)
        .map_err(|e| PipelineError::Config(format!("report serialization: {e}")))?;
    Ok(())
}

/// Plot-ready cumulative profit curve: one `(timestamp, cumulative PR)` row
/// per test bar across all windows.
pub fn write_equity_curve(
    path: &Path,
    points: &[(NaiveDateTime, f64)],
) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time,cumulative_pr_pct")?;
    for (time, value) in points {
        writeln!(w, "{time},{value}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_series, SynthConfig};
    use crate::trading::{Direction, Trade, TradeLog};
    use chrono::Duration;

    fn tiny_config(dir: &Path, data: &Path) -> PipelineConfig {
        let mut config = PipelineConfig::default();
        config.data.path = data.to_path_buf();
        config.data.period_minutes = 30;
        config.chart.rows = 40;
        config.hog.layers = vec![
            HogLayer {
                window_side: 3,
                stride: 2,
                bins: 9,
            },
            HogLayer {
                window_side: 6,
                stride: 3,
                bins: 9,
            },
        ];
        config.fsom.layer_rows = 4;
        config.fsom.layer_cols = 4;
        config.fsom.output_rows = 3;
        config.fsom.output_cols = 3;
        config.fsom.epsilon = 1e-2;
        config.fsom.max_iter = 8;
        config.gru.hidden_dim = 4;
        config.gru.epochs = 15;
        config.gru.min_cluster_samples = 8;
        config.schedule.train_days = 6;
        config.schedule.test_days = 2;
        config.schedule.count = 2;
        config.output.dir = dir.to_path_buf();
        config
    }

    fn write_synth_data(path: &Path) {
        let series = generate_series(&SynthConfig {
            days: 12,
            minutes_per_day: 120,
            seed: 5,
            ..SynthConfig::default()
        });
        let mut bytes = Vec::new();
        crate::synth::write_csv(&series, &mut bytes).unwrap();
        fs::write(path, bytes).unwrap();
    }

    #[test]
    fn default_config_mirrors_published_parameters() {
        let config = PipelineConfig::default();
        assert_eq!(config.chart.rows, 100);
        assert_eq!(config.chart.window_bars, 10);
        assert_eq!(config.data.period_minutes, 30);
        assert_eq!(config.hog.layers[0].window_side, 3);
        assert_eq!(config.hog.layers[0].stride, 1);
        assert_eq!(config.hog.layers[1].window_side, 6);
        assert_eq!(config.hog.layers[1].stride, 2);
        assert_eq!((config.fsom.layer_rows, config.fsom.layer_cols), (15, 15));
        assert_eq!((config.fsom.output_rows, config.fsom.output_cols), (8, 8));
        assert_eq!(config.trading.fee_rate, 0.002);
        assert_eq!(config.schedule.count, 6);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let config = PipelineConfig::default();
        assert_eq!(config.content_hash(), config.content_hash());
        let mut other = PipelineConfig::default();
        other.seeds.fsom = 99;
        assert_ne!(config.content_hash(), other.content_hash());
    }

    #[test]
    fn normalizer_roundtrips_and_handles_flat_data() {
        let n = Normalizer::fit([4.0, 8.0, 6.0].into_iter());
        assert_eq!(n.norm(4.0), 0.0);
        assert_eq!(n.norm(8.0), 1.0);
        assert!((n.denorm(n.norm(6.0)) - 6.0).abs() < 1e-12);
        let flat = Normalizer::fit([5.0, 5.0].into_iter());
        assert_eq!(flat.norm(5.0), 0.5);
        assert_eq!(flat.denorm(0.5), 5.0);
    }

    #[test]
    fn pipeline_produces_reports_and_no_leakage() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data.csv");
        write_synth_data(&data);
        let out = tmp.path().join("out");
        let config = tiny_config(&out, &data);
        let summary = run_pipeline(&config).unwrap();
        assert_eq!(summary.rows.len(), 2);
        for wm in &summary.manifest.windows {
            assert!(wm.max_train_timestamp < wm.min_test_timestamp);
            assert!(wm.test_bars > 0);
        }
        assert!(out.join("report.csv").exists());
        assert!(out.join("report.json").exists());
        assert!(out.join("equity_curve.csv").exists());
        assert!(out.join("manifest.json").exists());
        assert!(out.join("trades_window_1.csv").exists());
        assert!(out.join("predictions_window_2.csv").exists());
        assert!(out.join("gru_loss_window_1.csv").exists());
        let last = summary.rows.last().unwrap();
        assert!((last.sumpr_pct - summary.sumpr_pct).abs() < 1e-12);
    }

    #[test]
    fn in_memory_series_matches_the_file_path() {
        let tmp = tempfile::tempdir().unwrap();
        let series = generate_series(&SynthConfig {
            days: 12,
            minutes_per_day: 120,
            seed: 5,
            ..SynthConfig::default()
        });
        let data = tmp.path().join("data.csv");
        let mut bytes = Vec::new();
        crate::synth::write_csv(&series, &mut bytes).unwrap();
        fs::write(&data, bytes).unwrap();

        let out_file = tmp.path().join("from_file");
        run_pipeline(&tiny_config(&out_file, &data)).unwrap();
        let out_mem = tmp.path().join("from_series");
        run_pipeline_on_series(&tiny_config(&out_mem, &data), &series).unwrap();
        for name in ["report.csv", "equity_curve.csv", "trades_window_1.csv"] {
            assert_eq!(
                fs::read(out_file.join(name)).unwrap(),
                fs::read(out_mem.join(name)).unwrap(),
                "{name} differs between entry points"
            );
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data.csv");
        write_synth_data(&data);
        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        run_pipeline(&tiny_config(&out_a, &data)).unwrap();
        run_pipeline(&tiny_config(&out_b, &data)).unwrap();
        for name in [
            "report.csv",
            "report.json",
            "equity_curve.csv",
            "trades_window_1.csv",
        ] {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn cache_reuses_the_trained_model() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data.csv");
        write_synth_data(&data);
        let out = tmp.path().join("out");
        let mut config = tiny_config(&out, &data);
        config.output.cache = true;
        let first = run_pipeline(&config).unwrap();
        assert!(first.manifest.windows.iter().all(|w| !w.cache_hit));
        let second = run_pipeline(&config).unwrap();
        assert!(second.manifest.windows.iter().all(|w| w.cache_hit));
        for (a, b) in first.rows.iter().zip(second.rows.iter()) {
            assert_eq!(a.metrics, b.metrics);
        }
    }

    #[test]
    fn missing_data_file_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        let config = tiny_config(&tmp.path().join("out"), Path::new("/nonexistent/data.csv"));
        assert!(matches!(
            run_pipeline(&config).unwrap_err(),
            PipelineError::Data(_)
        ));
    }

    #[test]
    fn bad_config_is_a_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data.csv");
        write_synth_data(&data);
        let mut config = tiny_config(&tmp.path().join("out"), &data);
        config.gru.learning_rate = -1.0;
        assert!(matches!(
            run_pipeline(&config).unwrap_err(),
            PipelineError::Config(_)
        ));
    }

    #[test]
    fn emit_report_handles_empty_and_matches_json() {
        let tmp = tempfile::tempdir().unwrap();
        emit_report(&[], tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1);

        let log = TradeLog {
            trades: vec![Trade::new(
                Direction::Long,
                NaiveDateTime::parse_from_str("2020-08-31T09:00", "%Y-%m-%dT%H:%M").unwrap(),
                NaiveDateTime::parse_from_str("2020-08-31T09:30", "%Y-%m-%dT%H:%M").unwrap(),
                100.0,
                103.0,
                0.002,
            )],
        };
        let metrics = report(&log);
        let rows = vec![ReportRow {
            window: 1,
            metrics,
            sumpr_pct: 2.8,
        }];
        emit_report(&rows, tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap())
                .unwrap();
        let cells: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(
            cells[0].parse::<u64>().unwrap(),
            json[0]["window"].as_u64().unwrap()
        );
        assert_eq!(
            cells[1].parse::<f64>().unwrap(),
            json[0]["pr_pct"].as_f64().unwrap()
        );
        assert_eq!(
            cells[10].parse::<f64>().unwrap(),
            json[0]["accuracy_pct"].as_f64().unwrap()
        );
    }

    #[test]
    fn sumpr_accumulates_across_windows() {
        let tmp = tempfile::tempdir().unwrap();
        let make_row = |window: usize, pr: f64, sum: f64| ReportRow {
            window,
            metrics: MetricsReport {
                pr_pct: pr,
                tn: 1,
                tn_plus: 1,
                tn_minus: 0,
                avg_return: Some(pr),
                avg_profit: Some(pr),
                avg_loss: None,
                pl_ratio: None,
                accuracy_pct: Some(100.0),
            },
            sumpr_pct: sum,
        };
        let rows = vec![
            make_row(1, 10.0, 10.0),
            make_row(2, -2.0, 8.0),
            make_row(3, 18.34, 26.34),
        ];
        emit_report(&rows, tmp.path()).unwrap();
        let csv = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with("3,"));
        assert!((last.split(',').nth(2).unwrap().parse::<f64>().unwrap() - 26.34).abs() < 1e-12);
    }

    #[test]
    fn predictions_roundtrip_and_backtest() {
        let tmp = tempfile::tempdir().unwrap();
        let t0 = NaiveDateTime::parse_from_str("2020-08-31T09:00", "%Y-%m-%dT%H:%M").unwrap();
        let records: Vec<PredictionRecord> = (0..5)
            .map(|i| PredictionRecord {
                decision_time: t0 + Duration::minutes(30 * i),
                close_t: 100.0,
                predicted_next_close: if i % 2 == 0 { 102.0 } else { 100.0 },
                entry_time: t0 + Duration::minutes(30 * i + 30),
                entry_price: 100.0,
                exit_time: t0 + Duration::minutes(30 * i + 59),
                exit_price: 101.0,
            })
            .collect();
        let path = tmp.path().join("predictions.csv");
        write_predictions(&path, &records).unwrap();
        let back = read_predictions(&path).unwrap();
        assert_eq!(back.len(), records.len());
        assert_eq!(back[0].decision_time, records[0].decision_time);
        let (log, metrics) = backtest_predictions(&back, 0.001, 0.002).unwrap();
        assert_eq!(log.len(), 3); // the even rows signal long
        assert_eq!(metrics.tn, 3);
        assert!((log.trades[0].net_return - 0.008).abs() < 1e-12);
    }
}
