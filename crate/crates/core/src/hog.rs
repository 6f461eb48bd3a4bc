//! Histogram-of-oriented-gradients descriptors over sliding windows.
//!
//! Grayscale conversion uses the 0.3/0.59/0.11 channel weights, gradients are
//! central differences with replicate-edge padding, and each sliding window
//! yields an unweighted count histogram of per-pixel orientation bins. No
//! block normalization or magnitude weighting is applied.

use std::io::{Read, Write};

use thiserror::Error;

use crate::chart::CandleImage;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum HogError {
    #[error("channel shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("image {rows}x{cols} is too small (needs at least 3x3)")]
    TooSmall { rows: usize, cols: usize },
    #[error("window side {window} exceeds image extent {limit}")]
    WindowTooLarge { window: usize, limit: usize },
    #[error("invalid HOG configuration: {0}")]
    BadConfig(String),
    #[error("malformed descriptor bytes: {0}")]
    BadBytes(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Orientation-binning and sliding-window parameters. `bins` intervals cover
/// [0°, 180°); the two scales used by default are 3x3/stride-1 and
/// 6x6/stride-2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HogConfig {
    pub bins: usize,
    pub window_side: usize,
    pub stride: usize,
}

impl HogConfig {
    pub fn new(bins: usize, window_side: usize, stride: usize) -> Result<Self, HogError> {
        if bins == 0 || window_side == 0 || stride == 0 {
            return Err(HogError::BadConfig(
                "bins, window_side and stride must all be positive".into(),
            ));
        }
        Ok(Self {
            bins,
            window_side,
            stride,
        })
    }

    /// Fine scale: 3x3 windows, stride 1.
    pub fn fine() -> Self {
        Self {
            bins: 9,
            window_side: 3,
            stride: 1,
        }
    }

    /// Coarse scale: 6x6 windows, stride 2.
    pub fn coarse() -> Self {
        Self {
            bins: 9,
            window_side: 6,
            stride: 2,
        }
    }

    pub fn bin_span_degrees(&self) -> f64 {
        180.0 / self.bins as f64
    }
}

/// Grayscale view of a candlestick image, same shape as its source channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub pixels: Matrix,
}

impl GrayImage {
    pub fn rows(&self) -> usize {
        self.pixels.rows()
    }

    pub fn cols(&self) -> usize {
        self.pixels.cols()
    }
}

/// Per-pixel orientation bin indices in `0..bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationGrid {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl OrientationGrid {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }
}

/// The descriptor grid: one `bins`-dimensional count histogram per window
/// placement, ordered row-major over placements.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub descriptors: Vec<Vec<f64>>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl PatchGrid {
    pub fn total(&self) -> usize {
        self.descriptors.len()
    }
}

/// Pixel-wise `0.3 R + 0.59 G + 0.11 B`.
pub fn to_grayscale(image: &CandleImage) -> Result<GrayImage, HogError> {
    if !image.red.same_shape(&image.green) || !image.red.same_shape(&image.blue) {
        return Err(HogError::ShapeMismatch(
            image.red.rows(),
            image.red.cols(),
            image.blue.rows(),
            image.blue.cols(),
        ));
    }
    let rows = image.rows();
    let cols = image.cols();
    let mut pixels = Matrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let v = 0.3 * image.red.get(r, c)
                + 0.59 * image.green.get(r, c)
                + 0.11 * image.blue.get(r, c);
            pixels.set(r, c, v);
        }
    }
    Ok(GrayImage { pixels })
}

/// Central-difference gradients. `gx` differences run along the column axis
/// (horizontal), `gy` along the row axis (vertical); border pixels use
/// replicate-edge padding so both matrices keep the image shape.
pub fn gradients(gray: &GrayImage) -> Result<(Matrix, Matrix), HogError> {
    let rows = gray.rows();
    let cols = gray.cols();
    if rows < 3 || cols < 3 {
        return Err(HogError::TooSmall { rows, cols });
    }
    let mut gx = Matrix::zeros(rows, cols);
    let mut gy = Matrix::zeros(rows, cols);
    let px = &gray.pixels;
    for r in 0..rows {
        for c in 0..cols {
            let left = px.get(r, c.saturating_sub(1));
            let right = px.get(r, (c + 1).min(cols - 1));
            gx.set(r, c, right - left);
            let up = px.get(r.saturating_sub(1), c);
            let down = px.get((r + 1).min(rows - 1), c);
            gy.set(r, c, down - up);
        }
    }
    Ok((gx, gy))
}

/// Folds the gradient angle into [0°, 180°) and buckets it into
/// `floor(theta / span)`. A fully degenerate gradient (both components zero)
/// lands in bin 0.
pub fn orientation_bins(
    gx: &Matrix,
    gy: &Matrix,
    config: &HogConfig,
) -> Result<OrientationGrid, HogError> {
    if !gx.same_shape(gy) {
        return Err(HogError::ShapeMismatch(
            gx.rows(),
            gx.cols(),
            gy.rows(),
            gy.cols(),
        ));
    }
    let span = config.bin_span_degrees();
    let mut data = Vec::with_capacity(gx.rows() * gx.cols());
    for r in 0..gx.rows() {
        for c in 0..gx.cols() {
            data.push(bin_of(gx.get(r, c), gy.get(r, c), span, config.bins));
        }
    }
    Ok(OrientationGrid {
        rows: gx.rows(),
        cols: gx.cols(),
        data,
    })
}

fn bin_of(gx: f64, gy: f64, span: f64, bins: usize) -> u8 {
    if gx == 0.0 && gy == 0.0 {
        return 0;
    }
    let mut theta = (gy / gx).atan().to_degrees();
    if theta < 0.0 {
        theta += 180.0;
    }
    let bin = (theta / span).floor() as usize;
    bin.min(bins - 1) as u8
}

/// Window start offsets along one axis: advance by `stride`; when the spans
/// do not divide evenly the final window is shifted flush with the border so
/// the ceil-based count holds without reading out of bounds.
pub fn axis_positions(len: usize, window: usize, stride: usize) -> Vec<usize> {
    let count = (len - window).div_ceil(stride) + 1;
    (0..count).map(|i| (i * stride).min(len - window)).collect()
}

/// Slides `window_side` x `window_side` windows over the image at the given
/// stride and returns one orientation-count histogram per placement.
pub fn extract_patch_grid(gray: &GrayImage, config: &HogConfig) -> Result<PatchGrid, HogError> {
    let rows = gray.rows();
    let cols = gray.cols();
    if config.window_side > rows.min(cols) {
        return Err(HogError::WindowTooLarge {
            window: config.window_side,
            limit: rows.min(cols),
        });
    }
    let (gx, gy) = gradients(gray)?;
    let grid = orientation_bins(&gx, &gy, config)?;
    let row_starts = axis_positions(rows, config.window_side, config.stride);
    let col_starts = axis_positions(cols, config.window_side, config.stride);
    let mut descriptors = Vec::with_capacity(row_starts.len() * col_starts.len());
    for &r0 in &row_starts {
        for &c0 in &col_starts {
            let mut hist = vec![0.0f64; config.bins];
            for r in r0..r0 + config.window_side {
                for c in c0..c0 + config.window_side {
                    hist[grid.get(r, c) as usize] += 1.0;
                }
            }
            descriptors.push(hist);
        }
    }
    Ok(PatchGrid {
        descriptors,
        n_rows: row_starts.len(),
        n_cols: col_starts.len(),
    })
}

/// Writes a descriptor cache: header `(rows, cols, bins, window_side,
/// stride)` as little-endian u32, then every histogram row-major as f64.
pub fn write_descriptors<W: Write>(
    mut w: W,
    rows: usize,
    cols: usize,
    config: &HogConfig,
    grids: &[PatchGrid],
) -> Result<(), HogError> {
    for v in [rows, cols, config.bins, config.window_side, config.stride] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for grid in grids {
        for hist in &grid.descriptors {
            for v in hist {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// A parsed descriptor cache: the image shape and scale it was extracted
/// with, plus every histogram in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorCache {
    pub rows: usize,
    pub cols: usize,
    pub config: HogConfig,
    pub histograms: Vec<Vec<f64>>,
}

/// Reads a descriptor cache written by [`write_descriptors`].
pub fn read_descriptors<R: Read>(mut r: R) -> Result<DescriptorCache, HogError> {
    let mut header = [0u32; 5];
    for h in header.iter_mut() {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *h = u32::from_le_bytes(buf);
    }
    let config = HogConfig::new(header[2] as usize, header[3] as usize, header[4] as usize)?;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() % (8 * config.bins) != 0 {
        return Err(HogError::BadBytes(format!(
            "payload of {} bytes is not a whole number of {}-bin histograms",
            raw.len(),
            config.bins
        )));
    }
    let histograms = raw
        .chunks_exact(8 * config.bins)
        .map(|chunk| {
            chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect()
        })
        .collect();
    Ok(DescriptorCache {
        rows: header[0] as usize,
        cols: header[1] as usize,
        config,
        histograms,
    })
}
