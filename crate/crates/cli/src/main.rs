//! `klinesom` command line: the full walk-forward pipeline plus the
//! standalone stages (render, features, cluster, backtest) and a synthetic
//! data generator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! failure.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use klinesom_core::chart::{render_window, CandleImage, ChartError};
use klinesom_core::dfsom::{DfsomError, DfsomModel};
use klinesom_core::fsom::FsomError;
use klinesom_core::gru::GruError;
use klinesom_core::hog::{extract_patch_grid, to_grayscale, write_descriptors, HogError};
use klinesom_core::market_data::{aggregate, parse_minute_bars, AggBar, DataError};
use klinesom_core::pipeline::{
    backtest_predictions, emit_report, read_predictions, run_pipeline, PipelineConfig,
    PipelineError, ReportRow,
};
use klinesom_core::synth::{generate_series, write_csv, SynthConfig};

#[derive(Parser)]
#[command(
    name = "klinesom",
    version,
    about = "Candlestick-image clustering and walk-forward trading research"
)]
struct Cli {
    /// Verbose per-stage logging.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: ingest, schedule, train, predict, trade, report.
    Run(RunArgs),
    /// Render candlestick images only.
    Render(RenderArgs),
    /// Dump HOG descriptors for one configured layer.
    Features(FeaturesArgs),
    /// Train the clustering model on all image windows and dump assignments.
    Cluster(ClusterArgs),
    /// Replay threshold decisions over cached predictions.
    Backtest(BacktestArgs),
    /// Generate a deterministic synthetic minute-bar CSV.
    Synth(SynthArgs),
}

/// Options shared by the data-driven commands; every flag overrides the
/// corresponding config-file field.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file; omitted fields keep the published defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Minute-bar CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aggregation period in minutes.
    #[arg(long)]
    period: Option<usize>,
    /// Walk-forward window count.
    #[arg(long)]
    count: Option<usize>,
    /// Training span in days.
    #[arg(long)]
    train_days: Option<i64>,
    /// Test span in days.
    #[arg(long)]
    test_days: Option<i64>,
    /// Threshold fix rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Round-trip fee rate.
    #[arg(long)]
    fee: Option<f64>,
    /// Clustering seed.
    #[arg(long)]
    fsom_seed: Option<u64>,
    /// Predictor seed.
    #[arg(long)]
    gru_seed: Option<u64>,
    /// SOM convergence iteration cap.
    #[arg(long)]
    max_iter: Option<u32>,
    /// Predictor training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Cache trained clustering models under the output directory.
    #[arg(long)]
    cache: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<PipelineConfig>(&text).map_err(|e| {
                    anyhow!(PipelineError::Config(format!("{}: {e}", path.display())))
                })?
            }
            None => PipelineConfig::default(),
        };
        if let Some(data) = &self.data {
            config.data.path = data.clone();
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        if let Some(period) = self.period {
            config.data.period_minutes = period;
        }
        if let Some(count) = self.count {
            config.schedule.count = count;
        }
        if let Some(days) = self.train_days {
            config.schedule.train_days = days;
        }
        if let Some(days) = self.test_days {
            config.schedule.test_days = days;
        }
        if let Some(rate) = self.rate {
            config.trading.threshold_rate = rate;
        }
        if let Some(fee) = self.fee {
            config.trading.fee_rate = fee;
        }
        if let Some(seed) = self.fsom_seed {
            config.seeds.fsom = seed;
        }
        if let Some(seed) = self.gru_seed {
            config.seeds.gru = seed;
        }
        if let Some(max_iter) = self.max_iter {
            config.fsom.max_iter = max_iter;
        }
        if let Some(epochs) = self.epochs {
            config.gru.epochs = epochs;
        }
        if self.cache {
            config.output.cache = true;
        }
        if config.data.path.as_os_str().is_empty() {
            return Err(anyhow!(PipelineError::Config(
                "no data path: set data.path in the config or pass --data".into()
            )));
        }
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// First sliding-window index to render.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Maximum number of windows to render.
    #[arg(long, default_value_t = 16)]
    max_windows: usize,
    /// Also export PNGs for visual inspection.
    #[arg(long)]
    png: bool,
    /// Nearest-neighbour upscale factor for PNG export.
    #[arg(long, default_value_t = 4)]
    scale: usize,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Which configured HOG layer to extract.
    #[arg(long, default_value_t = 0)]
    layer: usize,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct BacktestArgs {
    /// Predictions CSV produced by `run`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.001)]
    rate: f64,
    #[arg(long, default_value_t = 0.002)]
    fee: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 60)]
    days: usize,
    #[arg(long, default_value_t = 240)]
    minutes_per_day: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 4000.0)]
    base: f64,
    #[arg(long, default_value_t = 1.5)]
    trend: f64,
    #[arg(long, default_value_t = 40.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 1800.0)]
    period_minutes: f64,
    #[arg(long, default_value_t = 4.0)]
    noise: f64,
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Render(args) => cmd_render(args),
        Command::Features(args) => cmd_features(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Backtest(args) => cmd_backtest(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(classify(&err));
        }
    }
}

/// Maps error types onto the documented exit codes.
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return match p {
                PipelineError::Config(_) => 1,
                PipelineError::Data(_)
                | PipelineError::Io(_)
                | PipelineError::WindowTooSmall { .. } => 2,
                PipelineError::LeakageDetected { .. } => 3,
                PipelineError::Stage { .. } => {
                    if p.is_numeric() {
                        3
                    } else {
                        2
                    }
                }
            };
        }
        if cause.downcast_ref::<DataError>().is_some() {
            return 2;
        }
        if let Some(h) = cause.downcast_ref::<HogError>() {
            return match h {
                HogError::BadConfig(_) | HogError::WindowTooLarge { .. } => 1,
                _ => 2,
            };
        }
        if let Some(f) = cause.downcast_ref::<FsomError>() {
            return match f {
                FsomError::NonFinite { .. } => 3,
                _ => 2,
            };
        }
        if let Some(g) = cause.downcast_ref::<GruError>() {
            return match g {
                GruError::Diverged { .. } | GruError::NonFiniteInput => 3,
                _ => 2,
            };
        }
        if let Some(d) = cause.downcast_ref::<DfsomError>() {
            return match d {
                DfsomError::Layer { source, .. } | DfsomError::Output(source) => {
                    if matches!(source, FsomError::NonFinite { .. }) {
                        3
                    } else {
                        2
                    }
                }
                _ => 2,
            };
        }
        if cause.downcast_ref::<ChartError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
    }
    1
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = args.config.load()?;
    let summary = run_pipeline(&config)?;
    println!("window  PR%      SUMPR%   TN    TN+   TN-   accuracy%");
    for row in &summary.rows {
        let m = &row.metrics;
        println!(
            "{:<7} {:<8.3} {:<8.3} {:<5} {:<5} {:<5} {}",
            row.window,
            m.pr_pct,
            row.sumpr_pct,
            m.tn,
            m.tn_plus,
            m.tn_minus,
            m.accuracy_pct
                .map(|a| format!("{a:.2}"))
                .unwrap_or_default(),
        );
    }
    println!(
        "cumulative PR {:.3}% over {} windows; artifacts in {}",
        summary.sumpr_pct,
        summary.rows.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn load_bars(config: &PipelineConfig) -> Result<Vec<AggBar>> {
    let file = File::open(&config.data.path)
        .with_context(|| format!("opening {}", config.data.path.display()))?;
    let series = parse_minute_bars(BufReader::new(file), &config.parse_options())?;
    Ok(aggregate(&series, config.data.period_minutes)?)
}

fn sliding_images(bars: &[AggBar], config: &PipelineConfig) -> Result<Vec<(usize, CandleImage)>> {
    let geometry = config.chart_geometry();
    let window = geometry.window_bars;
    if bars.len() < window {
        return Err(anyhow!(PipelineError::Data(DataError::SeriesTooShort {
            got: bars.len(),
            period: window,
        })));
    }
    (0..=bars.len() - window)
        .map(|i| {
            render_window(&bars[i..i + window], &geometry)
                .map(|image| (i, image))
                .map_err(|e| anyhow!(e))
        })
        .collect()
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let config = args.config.load()?;
    config.validate()?;
    let bars = load_bars(&config)?;
    let images = sliding_images(&bars, &config)?;
    fs::create_dir_all(&config.output.dir)?;
    let mut written = 0usize;
    for (index, image) in images.iter().skip(args.start).take(args.max_windows) {
        let stamp = bars[*index].start_time().format("%Y%m%dT%H%M");
        let bin_path = config
            .output
            .dir
            .join(format!("image_{index:05}_{stamp}.bin"));
        image.write_to(BufWriter::new(File::create(&bin_path)?))?;
        if args.png {
            let png_path = config
                .output
                .dir
                .join(format!("image_{index:05}_{stamp}.png"));
            write_png(&png_path, image, args.scale.max(1))?;
        }
        written += 1;
    }
    println!(
        "rendered {written} of {} windows into {}",
        images.len(),
        config.output.dir.display()
    );
    Ok(())
}

/// PNG export: 8-bit RGB, blue scaled by 255, flipped so price rises upward.
fn write_png(path: &std::path::Path, image: &CandleImage, scale: usize) -> Result<()> {
    let width = (image.cols() * scale) as u32;
    let height = (image.rows() * scale) as u32;
    let mut data = Vec::with_capacity((width * height * 3) as usize);
    for py in 0..height as usize {
        let row = image.rows() - 1 - py / scale;
        for px in 0..width as usize {
            let col = px / scale;
            for channel in [&image.red, &image.green, &image.blue] {
                data.push((channel.get(row, col).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&data)?;
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<()> {
    let config = args.config.load()?;
    config.validate()?;
    let layer = config
        .hog
        .layers
        .get(args.layer)
        .ok_or_else(|| {
            anyhow!(PipelineError::Config(format!(
                "layer {} out of range ({} configured)",
                args.layer,
                config.hog.layers.len()
            )))
        })?
        .clone();
    let hog = klinesom_core::hog::HogConfig::new(layer.bins, layer.window_side, layer.stride)?;
    let bars = load_bars(&config)?;
    let images = sliding_images(&bars, &config)?;
    let mut grids = Vec::with_capacity(images.len());
    for (_, image) in &images {
        grids.push(extract_patch_grid(&to_grayscale(image)?, &hog)?);
    }
    fs::create_dir_all(&config.output.dir)?;
    let out = config
        .output
        .dir
        .join(format!("descriptors_layer{}.bin", args.layer));
    let file = File::create(&out)?;
    write_descriptors(
        BufWriter::new(file),
        config.chart.rows,
        config.chart.window_bars,
        &hog,
        &grids,
    )?;
    let total: usize = grids.iter().map(|g| g.total()).sum();
    println!(
        "wrote {total} descriptors ({} windows x {} patches) to {}",
        grids.len(),
        grids.first().map(|g| g.total()).unwrap_or(0),
        out.display()
    );
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let config = args.config.load()?;
    config.validate()?;
    let bars = load_bars(&config)?;
    let images = sliding_images(&bars, &config)?;
    let pixels: Vec<CandleImage> = images.iter().map(|(_, im)| im.clone()).collect();
    let (model, stats) = DfsomModel::train(&pixels, &config.dfsom_config()?)?;
    fs::create_dir_all(&config.output.dir)?;

    let model_path = config.output.dir.join("dfsom_model.bin");
    model.write_to(BufWriter::new(File::create(&model_path)?))?;

    let assign_path = config.output.dir.join("assignments.csv");
    let mut w = BufWriter::new(File::create(&assign_path)?);
    writeln!(w, "window,start_time,cluster")?;
    for (index, image) in &images {
        let cluster = model.assign_cluster(image)?;
        writeln!(w, "{},{},{}", index, bars[*index].start_time(), cluster)?;
    }
    drop(w);

    for (layer, report) in stats.layer_reports.iter().enumerate() {
        println!(
            "layer {layer}: {} descriptors, {} iterations (converged: {})",
            stats.layer_pool_sizes[layer], report.iterations, report.converged
        );
    }
    println!(
        "output map: {} iterations (converged: {}); model at {}, assignments at {}",
        stats.output_report.iterations,
        stats.output_report.converged,
        model_path.display(),
        assign_path.display()
    );
    Ok(())
}

fn cmd_backtest(args: BacktestArgs) -> Result<()> {
    let records = read_predictions(&args.predictions)?;
    let (log, metrics) = backtest_predictions(&records, args.rate, args.fee)?;
    fs::create_dir_all(&args.out)?;
    let mut w = BufWriter::new(File::create(args.out.join("trades.csv"))?);
    log.write_csv(&mut w)?;
    drop(w);
    let rows = vec![ReportRow {
        window: 1,
        sumpr_pct: metrics.pr_pct,
        metrics: metrics.clone(),
    }];
    emit_report(&rows, &args.out)?;
    println!(
        "{} predictions -> {} trades, PR {:.3}%, accuracy {}",
        records.len(),
        metrics.tn,
        metrics.pr_pct,
        metrics
            .accuracy_pct
            .map(|a| format!("{a:.2}%"))
            .unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        days: args.days,
        minutes_per_day: args.minutes_per_day,
        base_price: args.base,
        trend_per_day: args.trend,
        sine_amplitude: args.amplitude,
        sine_period_minutes: args.period_minutes,
        noise: args.noise,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let series = generate_series(&config);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_csv(&series, &mut w)?;
    println!(
        "wrote {} minute bars over {} days to {}",
        series.len(),
        args.days,
        args.out.display()
    );
    Ok(())
}
