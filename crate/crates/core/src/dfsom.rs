//! Deep fuzzy self-organizing map over multi-scale patch descriptors.
//!
//! One fuzzy SOM per parallel layer samples that layer's HOG patch grid into
//! a feature map of normalized BMU indices, the per-layer maps are spliced in
//! layer order and zero-padded up to the next perfect square, and an output
//! fuzzy SOM clusters the combined maps. Training is staged: layer SOMs fit
//! on the pooled patch descriptors of every training image, then the output
//! SOM fits on the encoded maps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::CandleImage;
use crate::fsom::{FitReport, FsomError, FsomGrid};
use crate::hog::{extract_patch_grid, to_grayscale, HogConfig, HogError};

#[derive(Debug, Error)]
pub enum DfsomError {
    #[error("training requires at least one image")]
    NoImages,
    #[error("layer index {got} out of range ({layers} layers)")]
    BadLayer { got: usize, layers: usize },
    #[error("feature maps must arrive in strictly increasing layer order")]
    UnorderedMaps,
    #[error("combined sampling needs at least one feature map")]
    NoMaps,
    #[error("image is {got_rows}x{got_cols} but the model was trained on {rows}x{cols}")]
    ImageShape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("malformed model bytes: {0}")]
    BadBytes(String),
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: FsomError,
    },
    #[error("output map: {0}")]
    Output(#[source] FsomError),
    #[error(transparent)]
    Fsom(#[from] FsomError),
    #[error(transparent)]
    Hog(#[from] HogError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Geometry and convergence settings for one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfsomConfig {
    /// One HOG scale per parallel layer, in layer order.
    pub layer_hog: Vec<HogConfig>,
    /// Lattice extent of every parallel-layer SOM.
    pub layer_grid: (usize, usize),
    /// Lattice extent of the output SOM.
    pub output_grid: (usize, usize),
    pub epsilon: f64,
    pub max_iter: u32,
    pub seed: u64,
}

impl Default for DfsomConfig {
    fn default() -> Self {
        Self {
            layer_hog: vec![HogConfig::fine(), HogConfig::coarse()],
            layer_grid: (15, 15),
            output_grid: (8, 8),
            epsilon: crate::fsom::DEFAULT_EPSILON,
            max_iter: crate::fsom::DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

/// One layer's sampled feature map: the normalized BMU index of every patch,
/// in the patch grid's row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub codes: Vec<f64>,
    pub layer: usize,
}

/// The spliced and square-padded feature map fed to the output SOM.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedFeatureMap {
    pub values: Vec<f64>,
    pub original_len: usize,
    pub side: usize,
}

impl CombinedFeatureMap {
    pub fn padded_len(&self) -> usize {
        self.side * self.side
    }
}

/// Convergence reports from the staged training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DfsomTrainStats {
    pub layer_reports: Vec<FitReport>,
    pub output_report: FitReport,
    pub layer_pool_sizes: Vec<usize>,
}

/// A trained model: the per-layer SOMs, their HOG scales and the output SOM.
#[derive(Debug, Clone, PartialEq)]
pub struct DfsomModel {
    layer_fsoms: Vec<FsomGrid>,
    layer_configs: Vec<HogConfig>,
    output_fsom: FsomGrid,
    image_rows: usize,
    image_cols: usize,
}

const BUNDLE_VERSION: u8 = 1;

impl DfsomModel {
    /// Staged training over a set of candlestick images.
    pub fn train(
        images: &[CandleImage],
        config: &DfsomConfig,
    ) -> Result<(Self, DfsomTrainStats), DfsomError> {
        let first = images.first().ok_or(DfsomError::NoImages)?;
        let (image_rows, image_cols) = (first.rows(), first.cols());
        for image in images {
            if image.rows() != image_rows || image.cols() != image_cols {
                return Err(DfsomError::ImageShape {
                    rows: image_rows,
                    cols: image_cols,
                    got_rows: image.rows(),
                    got_cols: image.cols(),
                });
            }
        }

        // Stage 1: fit one SOM per layer on the pooled patch descriptors.
        let grays: Vec<_> = images
            .iter()
            .map(to_grayscale)
            .collect::<Result<Vec<_>, _>>()?;
        let mut layer_fsoms = Vec::with_capacity(config.layer_hog.len());
        let mut layer_reports = Vec::with_capacity(config.layer_hog.len());
        let mut layer_pool_sizes = Vec::with_capacity(config.layer_hog.len());
        for (layer, hog) in config.layer_hog.iter().enumerate() {
            let mut pool: Vec<Vec<f64>> = Vec::new();
            for gray in &grays {
                pool.extend(extract_patch_grid(gray, hog)?.descriptors);
            }
            layer_pool_sizes.push(pool.len());
            let seed = layer_seed(config.seed, layer as u64);
            let mut fsom = FsomGrid::from_data_bounds(
                config.layer_grid.0,
                config.layer_grid.1,
                hog.bins,
                seed,
                &pool,
            )
            .with_epsilon(config.epsilon);
            let report = fsom
                .fit(&pool, config.max_iter)
                .map_err(|source| DfsomError::Layer { layer, source })?;
            layer_reports.push(report);
            layer_fsoms.push(fsom);
        }

        let mut model = Self {
            layer_fsoms,
            layer_configs: config.layer_hog.clone(),
            output_fsom: FsomGrid::new(1, 1, 1, 0), // replaced below
            image_rows,
            image_cols,
        };

        // Stage 2: encode every training image through the parallel layers.
        let combined: Vec<Vec<f64>> = images
            .iter()
            .map(|image| model.encode(image).map(|c| c.values))
            .collect::<Result<_, _>>()?;

        // Stage 3: fit the output SOM on the combined maps.
        let dim = combined[0].len();
        let seed = layer_seed(config.seed, config.layer_hog.len() as u64);
        let mut output = FsomGrid::from_data_bounds(
            config.output_grid.0,
            config.output_grid.1,
            dim,
            seed,
            &combined,
        )
        .with_epsilon(config.epsilon);
        let output_report = output
            .fit(&combined, config.max_iter)
            .map_err(DfsomError::Output)?;
        model.output_fsom = output;

        Ok((
            model,
            DfsomTrainStats {
                layer_reports,
                output_report,
                layer_pool_sizes,
            },
        ))
    }

    pub fn layer_count(&self) -> usize {
        self.layer_fsoms.len()
    }

    pub fn layer_fsom(&self, layer: usize) -> Option<&FsomGrid> {
        self.layer_fsoms.get(layer)
    }

    pub fn layer_config(&self, layer: usize) -> Option<&HogConfig> {
        self.layer_configs.get(layer)
    }

    pub fn output_fsom(&self) -> &FsomGrid {
        &self.output_fsom
    }

    pub fn cluster_count(&self) -> usize {
        self.output_fsom.neuron_count()
    }

    fn check_image(&self, image: &CandleImage) -> Result<(), DfsomError> {
        if image.rows() != self.image_rows || image.cols() != self.image_cols {
            return Err(DfsomError::ImageShape {
                rows: self.image_rows,
                cols: self.image_cols,
                got_rows: image.rows(),
                got_cols: image.cols(),
            });
        }
        Ok(())
    }

    /// Runs one parallel layer: every patch descriptor is replaced by its
    /// BMU's flat index normalized into [0, 1], preserving patch order.
    pub fn parallel_layer(
        &self,
        image: &CandleImage,
        layer: usize,
    ) -> Result<FeatureMap, DfsomError> {
        self.check_image(image)?;
        let fsom = self.layer_fsoms.get(layer).ok_or(DfsomError::BadLayer {
            got: layer,
            layers: self.layer_fsoms.len(),
        })?;
        let hog = &self.layer_configs[layer];
        let gray = to_grayscale(image)?;
        let grid = extract_patch_grid(&gray, hog)?;
        let scale = (fsom.neuron_count() - 1).max(1) as f64;
        let codes = grid
            .descriptors
            .iter()
            .map(|descriptor| fsom.bmu_flat(descriptor) as f64 / scale)
            .collect();
        Ok(FeatureMap { codes, layer })
    }

    /// Encodes an image through every parallel layer and splices the maps.
    pub fn encode(&self, image: &CandleImage) -> Result<CombinedFeatureMap, DfsomError> {
        let maps = (0..self.layer_fsoms.len())
            .map(|layer| self.parallel_layer(image, layer))
            .collect::<Result<Vec<_>, _>>()?;
        combined_sampling(&maps)
    }

    /// Cluster id of the image: the flat row-major BMU index on the output
    /// lattice.
    pub fn assign_cluster(&self, image: &CandleImage) -> Result<usize, DfsomError> {
        let combined = self.encode(image)?;
        Ok(self.output_fsom.bmu_flat(&combined.values))
    }

    /// Bundle layout: version byte, image extents, per-layer HOG config plus
    /// serialized SOM, then the output SOM.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), DfsomError> {
        w.write_all(&[BUNDLE_VERSION])?;
        w.write_all(&(self.image_rows as u32).to_le_bytes())?;
        w.write_all(&(self.image_cols as u32).to_le_bytes())?;
        w.write_all(&[self.layer_fsoms.len() as u8])?;
        for (fsom, hog) in self.layer_fsoms.iter().zip(self.layer_configs.iter()) {
            for v in [hog.bins, hog.window_side, hog.stride] {
                w.write_all(&(v as u32).to_le_bytes())?;
            }
            fsom.write_to(&mut w)?;
        }
        self.output_fsom.write_to(&mut w)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, DfsomError> {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if byte[0] != BUNDLE_VERSION {
            return Err(DfsomError::BadBytes(format!(
                "unsupported bundle version {}",
                byte[0]
            )));
        }
        let image_rows = read_u32(&mut r)? as usize;
        let image_cols = read_u32(&mut r)? as usize;
        r.read_exact(&mut byte)?;
        let layers = byte[0] as usize;
        let mut layer_configs = Vec::with_capacity(layers);
        let mut layer_fsoms = Vec::with_capacity(layers);
        for _ in 0..layers {
            let bins = read_u32(&mut r)? as usize;
            let window_side = read_u32(&mut r)? as usize;
            let stride = read_u32(&mut r)? as usize;
            layer_configs.push(HogConfig::new(bins, window_side, stride)?);
            layer_fsoms.push(FsomGrid::read_from(&mut r)?);
        }
        let output_fsom = FsomGrid::read_from(&mut r)?;
        Ok(Self {
            layer_fsoms,
            layer_configs,
            output_fsom,
            image_rows,
            image_cols,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DfsomError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Derives per-stage seeds from the run seed so every SOM draws an
/// independent deterministic stream.
fn layer_seed(seed: u64, stage: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(stage.wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Splices feature maps in layer order and zero-pads the result up to the
/// smallest perfect square.
pub fn combined_sampling(maps: &[FeatureMap]) -> Result<CombinedFeatureMap, DfsomError> {
    if maps.is_empty() {
        return Err(DfsomError::NoMaps);
    }
    if maps.windows(2).any(|w| w[0].layer >= w[1].layer) {
        return Err(DfsomError::UnorderedMaps);
    }
    let mut values: Vec<f64> = Vec::new();
    for map in maps {
        values.extend_from_slice(&map.codes);
    }
    let original_len = values.len();
    let side = smallest_square_side(original_len);
    values.resize(side * side, 0.0);
    Ok(CombinedFeatureMap {
        values,
        original_len,
        side,
    })
}

/// Smallest `s` with `s * s >= len`.
pub fn smallest_square_side(len: usize) -> usize {
    let mut side = (len as f64).sqrt().floor() as usize;
    while side * side < len {
        side += 1;
    }
    side
}
