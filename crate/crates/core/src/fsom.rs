//! Batch fuzzy self-organizing map.
//!
//! Memberships are inverse-square-distance weights normalized over all
//! neurons, and every neuron moves to its membership-weighted sample mean in
//! one batch step. There is no lattice neighborhood kernel: the grid only
//! gives best-matching units coordinates. Training stops when the largest
//! componentwise weight change drops below epsilon.

use std::io::{Read, Write};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FsomError {
    #[error("sample dimension {got} does not match grid dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("cannot fit on an empty sample set")]
    NoSamples,
    #[error("non-finite values encountered after iteration {iteration}; check input scaling")]
    NonFinite { iteration: u32 },
    #[error("malformed grid bytes: {0}")]
    BadBytes(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fuzzy memberships of one sample to every neuron, along with the raw
/// Euclidean distances. Memberships are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipRow {
    pub memberships: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Convergence report returned by [`FsomGrid::fit`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitReport {
    pub iterations: u32,
    pub final_delta: f64,
    pub converged: bool,
}

/// A `rows x cols` lattice of weight vectors of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FsomGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<f64>,
    epsilon: f64,
    seed: u64,
    iterations: u32,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: u32 = 500;

impl FsomGrid {
    /// Random initialization with weights uniform in [0, 1], deterministic
    /// under the seed.
    pub fn new(rows: usize, cols: usize, dim: usize, seed: u64) -> Self {
        Self::with_bounds(rows, cols, dim, seed, &vec![(0.0, 1.0); dim])
    }

    /// Random initialization with each component uniform over the given
    /// per-component range. HOG count descriptors are unnormalized, so
    /// drawing from the data bounds avoids dead neurons.
    pub fn with_bounds(
        rows: usize,
        cols: usize,
        dim: usize,
        seed: u64,
        bounds: &[(f64, f64)],
    ) -> Self {
        assert!(
            rows >= 1 && cols >= 1 && dim >= 1,
            "grid extents must be positive"
        );
        assert_eq!(bounds.len(), dim, "one bound pair per component");
        let mut rng = StdRng::seed_from_u64(seed);
        let neurons = rows * cols;
        let mut weights = Vec::with_capacity(neurons * dim);
        for _ in 0..neurons {
            for &(lo, hi) in bounds {
                let v = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                weights.push(v);
            }
        }
        Self {
            rows,
            cols,
            dim,
            weights,
            epsilon: DEFAULT_EPSILON,
            seed,
            iterations: 0,
        }
    }

    /// Initialization over the componentwise min/max of the training data.
    pub fn from_data_bounds(
        rows: usize,
        cols: usize,
        dim: usize,
        seed: u64,
        samples: &[Vec<f64>],
    ) -> Self {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dim];
        for sample in samples {
            for (b, &v) in bounds.iter_mut().zip(sample.iter()) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        for b in bounds.iter_mut() {
            if !b.0.is_finite() || !b.1.is_finite() {
                *b = (0.0, 1.0);
            }
        }
        Self::with_bounds(rows, cols, dim, seed, &bounds)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neuron_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iterations(&self) -> u32 {
        self.iterations
    }

    pub fn weight(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.dim..(neuron + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check_dim(&self, sample: &[f64]) -> Result<(), FsomError> {
        if sample.len() != self.dim {
            return Err(FsomError::DimMismatch {
                expected: self.dim,
                got: sample.len(),
            });
        }
        Ok(())
    }

    /// Euclidean distances from the sample to every neuron plus the fuzzy
    /// membership row. An exact hit on a neuron takes the crisp limit:
    /// membership 1 on the nearest zero-distance neuron, 0 elsewhere.
    pub fn memberships(&self, sample: &[f64]) -> MembershipRow {
        debug_assert_eq!(sample.len(), self.dim);
        let neurons = self.neuron_count();
        let mut distances = Vec::with_capacity(neurons);
        for j in 0..neurons {
            distances.push(euclidean(sample, self.weight(j)));
        }
        let mut memberships = vec![0.0; neurons];
        if let Some(hit) = distances.iter().position(|&d| d == 0.0) {
            memberships[hit] = 1.0;
        } else {
            let inv_sq: Vec<f64> = distances.iter().map(|&d| 1.0 / (d * d)).collect();
            let total: f64 = inv_sq.iter().sum();
            for (m, w) in memberships.iter_mut().zip(inv_sq.iter()) {
                *m = w / total;
            }
        }
        MembershipRow {
            memberships,
            distances,
        }
    }

    /// One batch step: every neuron moves by the membership-weighted average
    /// offset of all samples. Returns the largest componentwise |change|.
    pub fn batch_update(&mut self, samples: &[Vec<f64>]) -> Result<f64, FsomError> {
        if samples.is_empty() {
            return Err(FsomError::NoSamples);
        }
        for sample in samples {
            self.check_dim(sample)?;
        }
        let neurons = self.neuron_count();
        let mut offset_sums = vec![0.0f64; neurons * self.dim];
        let mut membership_sums = vec![0.0f64; neurons];
        for sample in samples {
            let row = self.memberships(sample);
            for j in 0..neurons {
                let r = row.memberships[j];
                if r == 0.0 {
                    continue;
                }
                membership_sums[j] += r;
                let w = &self.weights[j * self.dim..(j + 1) * self.dim];
                let out = &mut offset_sums[j * self.dim..(j + 1) * self.dim];
                for ((o, &x), &wi) in out.iter_mut().zip(sample.iter()).zip(w.iter()) {
                    *o += r * (x - wi);
                }
            }
        }
        let mut max_delta = 0.0f64;
        for j in 0..neurons {
            let denom = membership_sums[j];
            // A neuron can end up with zero membership mass only when every
            // sample hit some other neuron exactly; it then stays put.
            if denom == 0.0 {
                continue;
            }
            for i in 0..self.dim {
                let delta = offset_sums[j * self.dim + i] / denom;
                self.weights[j * self.dim + i] += delta;
                max_delta = max_delta.max(delta.abs());
            }
        }
        Ok(max_delta)
    }

    /// Repeats [`Self::batch_update`] until the maximum componentwise change
    /// drops below epsilon or `max_iter` is reached.
    pub fn fit(&mut self, samples: &[Vec<f64>], max_iter: u32) -> Result<FitReport, FsomError> {
        if samples.is_empty() {
            return Err(FsomError::NoSamples);
        }
        let mut report = FitReport {
            iterations: 0,
            final_delta: f64::INFINITY,
            converged: false,
        };
        for iteration in 1..=max_iter {
            let delta = self.batch_update(samples)?;
            report.iterations = iteration;
            report.final_delta = delta;
            if !delta.is_finite() || !self.weights.iter().all(|w| w.is_finite()) {
                return Err(FsomError::NonFinite { iteration });
            }
            if delta < self.epsilon {
                report.converged = true;
                break;
            }
        }
        self.iterations = report.iterations;
        Ok(report)
    }

    /// Best matching unit: the `(row, col)` of the neuron nearest to the
    /// sample. Ties break toward the smallest row-major flat index.
    pub fn bmu(&self, sample: &[f64]) -> (usize, usize) {
        let flat = self.bmu_flat(sample);
        (flat / self.cols, flat % self.cols)
    }

    /// Flat row-major index of the best matching unit.
    pub fn bmu_flat(&self, sample: &[f64]) -> usize {
        debug_assert_eq!(sample.len(), self.dim);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..self.neuron_count() {
            let d = squared_euclidean(sample, self.weight(j));
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Serialized layout: header `(rows, cols, dim)` as u32, epsilon as f64,
    /// seed as u64, iterations as u32, then row-major little-endian f64
    /// weights.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FsomError> {
        w.write_all(&(self.rows as u32).to_le_bytes())?;
        w.write_all(&(self.cols as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.iterations.to_le_bytes())?;
        for v in &self.weights {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, FsomError> {
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let epsilon = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let seed = u64::from_le_bytes(buf);
        let iterations = read_u32(&mut r)?;
        let count = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(dim))
            .ok_or_else(|| FsomError::BadBytes("grid extents overflow".into()))?;
        let mut weights = vec![0.0f64; count];
        for v in weights.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Self {
            rows,
            cols,
            dim,
            weights,
            epsilon,
            seed,
            iterations,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FsomError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cloud(seed: u64, count: usize, center: &[f64], spread: f64) -> Vec<Vec<f64>> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|&c| c + rng.random_range(-spread..spread))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn seeded_initialization_is_deterministic() {
        let a = FsomGrid::new(4, 5, 3, 99);
        let b = FsomGrid::new(4, 5, 3, 99);
        assert_eq!(a, b);
        let c = FsomGrid::new(4, 5, 3, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn published_grid_sizes() {
        assert_eq!(FsomGrid::new(15, 15, 9, 1).neuron_count(), 225);
        assert_eq!(FsomGrid::new(8, 8, 961, 1).neuron_count(), 64);
    }

    #[test]
    fn bounds_initialization_stays_in_range() {
        let bounds = vec![(0.0, 9.0), (-4.0, 4.0)];
        let grid = FsomGrid::with_bounds(6, 6, 2, 5, &bounds);
        for j in 0..grid.neuron_count() {
            let w = grid.weight(j);
            assert!((0.0..9.0).contains(&w[0]));
            assert!((-4.0..4.0).contains(&w[1]));
        }
    }

    #[test]
    fn memberships_sum_to_one_and_stay_positive() {
        let grid = FsomGrid::new(5, 5, 4, 3);
        let samples = sample_cloud(7, 50, &[0.5, 0.5, 0.5, 0.5], 0.5);
        for sample in &samples {
            let row = grid.memberships(sample);
            let total: f64 = row.memberships.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(row.memberships.iter().all(|&m| (0.0..=1.0).contains(&m)));
        }
    }

    #[test]
    fn equidistant_sample_gets_uniform_memberships() {
        // Two neurons mirrored around the origin; the origin is equidistant.
        let mut grid = FsomGrid::new(1, 2, 1, 0);
        grid.weights = vec![-1.0, 1.0];
        let row = grid.memberships(&[0.0]);
        assert!((row.memberships[0] - 0.5).abs() < 1e-12);
        assert!((row.memberships[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_hit_is_crisp() {
        let grid = FsomGrid::new(3, 3, 2, 8);
        let target = grid.weight(4).to_vec();
        let row = grid.memberships(&target);
        assert_eq!(row.memberships[4], 1.0);
        let others: f64 = row
            .memberships
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != 4)
            .map(|(_, &m)| m)
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn two_distances_give_inverse_square_split() {
        // d = (1, 2) -> memberships (0.8, 0.2)
        let mut grid = FsomGrid::new(1, 2, 1, 0);
        grid.weights = vec![1.0, 4.0];
        let row = grid.memberships(&[2.0]);
        assert_eq!(row.distances, vec![1.0, 2.0]);
        assert!((row.memberships[0] - 0.8).abs() < 1e-12);
        assert!((row.memberships[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn single_neuron_single_sample_jumps_to_sample() {
        let mut grid = FsomGrid::new(1, 1, 2, 7);
        let before = grid.weight(0).to_vec();
        let sample = vec![3.0, -1.5];
        let delta = grid.batch_update(std::slice::from_ref(&sample)).unwrap();
        assert!((grid.weight(0)[0] - 3.0).abs() < 1e-12);
        assert!((grid.weight(0)[1] + 1.5).abs() < 1e-12);
        let expected = (sample[0] - before[0])
            .abs()
            .max((sample[1] - before[1]).abs());
        assert!((delta - expected).abs() < 1e-12);
    }

    #[test]
    fn update_matches_weighted_mean_identity() {
        // The incremental form W + sum R (X - W) / sum R must equal the
        // membership-weighted sample mean.
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..100 {
            let dim = rng.random_range(1..5usize);
            let rows = rng.random_range(1..4usize);
            let cols = rng.random_range(1..4usize);
            let mut grid = FsomGrid::new(rows, cols, dim, rng.random_range(0..1_000));
            let samples: Vec<Vec<f64>> = (0..rng.random_range(1..20usize))
                .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            // Weighted-mean oracle computed against the pre-update weights.
            let membership_rows: Vec<Vec<f64>> = samples
                .iter()
                .map(|s| grid.memberships(s).memberships)
                .collect();
            let neurons = grid.neuron_count();
            let mut expected = vec![vec![0.0f64; dim]; neurons];
            for j in 0..neurons {
                let mass: f64 = membership_rows.iter().map(|r| r[j]).sum();
                if mass == 0.0 {
                    expected[j] = grid.weight(j).to_vec();
                    continue;
                }
                for i in 0..dim {
                    let weighted: f64 = membership_rows
                        .iter()
                        .zip(samples.iter())
                        .map(|(r, x)| r[j] * x[i])
                        .sum();
                    expected[j][i] = weighted / mass;
                }
            }
            grid.batch_update(&samples).unwrap();
            for (j, want_row) in expected.iter().enumerate() {
                for (i, &want) in want_row.iter().enumerate() {
                    let got = grid.weight(j)[i];
                    let scale = want.abs().max(1.0);
                    assert!(
                        (got - want).abs() <= 1e-12 * scale,
                        "neuron {j} component {i}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn fixed_point_when_samples_equal_weights() {
        let mut grid = FsomGrid::new(1, 1, 3, 2);
        let w = grid.weight(0).to_vec();
        let samples = vec![w.clone(), w.clone(), w];
        let delta = grid.batch_update(&samples).unwrap();
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn batch_update_is_order_free() {
        let samples = sample_cloud(3, 30, &[0.3, 0.7], 0.3);
        let mut reversed = samples.clone();
        reversed.reverse();
        let mut a = FsomGrid::new(2, 2, 2, 5);
        let mut b = FsomGrid::new(2, 2, 2, 5);
        let da = a.batch_update(&samples).unwrap();
        let db = b.batch_update(&reversed).unwrap();
        for j in 0..a.neuron_count() {
            for i in 0..2 {
                assert!((a.weight(j)[i] - b.weight(j)[i]).abs() < 1e-12);
            }
        }
        assert!((da - db).abs() < 1e-12);
    }

    #[test]
    fn fit_converges_to_two_cluster_means() {
        let mut samples = sample_cloud(21, 60, &[0.0, 0.0], 0.05);
        samples.extend(sample_cloud(22, 60, &[1.0, 1.0], 0.05));
        let mut grid = FsomGrid::from_data_bounds(1, 2, 2, 77, &samples).with_epsilon(1e-9);
        let report = grid.fit(&samples, 5_000).unwrap();
        assert!(report.converged);

        // Independent fixed-point oracle: iterate the same fuzzy dynamics
        // from the same initial weights with straight-line code.
        let init = FsomGrid::from_data_bounds(1, 2, 2, 77, &samples);
        let mut w = [init.weight(0).to_vec(), init.weight(1).to_vec()];
        for _ in 0..100_000 {
            let mut num = [[0.0f64; 2]; 2];
            let mut den = [0.0f64; 2];
            for s in &samples {
                let d0 = ((s[0] - w[0][0]).powi(2) + (s[1] - w[0][1]).powi(2)).sqrt();
                let d1 = ((s[0] - w[1][0]).powi(2) + (s[1] - w[1][1]).powi(2)).sqrt();
                let (r0, r1) = if d0 == 0.0 {
                    (1.0, 0.0)
                } else if d1 == 0.0 {
                    (0.0, 1.0)
                } else {
                    let (i0, i1) = (1.0 / (d0 * d0), 1.0 / (d1 * d1));
                    (i0 / (i0 + i1), i1 / (i0 + i1))
                };
                for (j, r) in [(0usize, r0), (1usize, r1)] {
                    den[j] += r;
                    num[j][0] += r * s[0];
                    num[j][1] += r * s[1];
                }
            }
            let mut shift = 0.0f64;
            for j in 0..2 {
                for i in 0..2 {
                    let next = num[j][i] / den[j];
                    shift = shift.max((next - w[j][i]).abs());
                    w[j][i] = next;
                }
            }
            if shift < 1e-13 {
                break;
            }
        }
        for (j, oracle) in w.iter().enumerate() {
            for (i, &want) in oracle.iter().enumerate() {
                assert!(
                    (grid.weight(j)[i] - want).abs() < 1e-6,
                    "neuron {j} component {i}: {} vs {want}",
                    grid.weight(j)[i]
                );
            }
        }
    }

    #[test]
    fn loose_epsilon_converges_in_one_iteration() {
        let samples = sample_cloud(31, 20, &[0.5], 0.1);
        let mut grid = FsomGrid::new(2, 2, 1, 4).with_epsilon(1e9);
        let report = grid.fit(&samples, 100).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn duplicate_samples_collapse_single_neuron_in_one_step() {
        let samples = vec![vec![0.25, 0.75]; 10];
        let mut grid = FsomGrid::new(1, 1, 2, 9).with_epsilon(1e-12);
        let report = grid.fit(&samples, 10).unwrap();
        assert!(report.converged);
        assert!((grid.weight(0)[0] - 0.25).abs() < 1e-12);
        assert!((grid.weight(0)[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn bmu_matches_exhaustive_scan() {
        let mut rng = StdRng::seed_from_u64(44);
        let grid = FsomGrid::new(6, 7, 3, 12);
        for _ in 0..200 {
            let sample: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
            let (row, col) = grid.bmu(&sample);
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for j in 0..grid.neuron_count() {
                let d = grid
                    .weight(j)
                    .iter()
                    .zip(sample.iter())
                    .map(|(w, x)| (w - x) * (w - x))
                    .sum::<f64>();
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            assert_eq!(row * 7 + col, best);
        }
    }

    #[test]
    fn bmu_of_exact_weight_and_tie_break() {
        let mut grid = FsomGrid::new(3, 4, 2, 6);
        let target = grid.weight(2 * 4 + 3).to_vec();
        assert_eq!(grid.bmu(&target), (2, 3));
        grid.weights = vec![0.5; 3 * 4 * 2];
        assert_eq!(grid.bmu(&[1.0, 1.0]), (0, 0));
    }

    #[test]
    fn bmu_agrees_with_top_membership() {
        let mut rng = StdRng::seed_from_u64(55);
        let grid = FsomGrid::new(4, 4, 2, 33);
        for _ in 0..100 {
            let sample: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..1.0)).collect();
            let row = grid.memberships(&sample);
            let distinct = row.distances.iter().enumerate().all(|(j, &d)| {
                row.distances
                    .iter()
                    .enumerate()
                    .all(|(k, &e)| j == k || d != e)
            });
            if !distinct {
                continue;
            }
            let argmax = row
                .memberships
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, grid.bmu_flat(&sample));
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let mut grid = FsomGrid::new(3, 5, 4, 123).with_epsilon(2e-5);
        let samples = sample_cloud(9, 40, &[0.4, 0.6, 0.1, 0.9], 0.2);
        grid.fit(&samples, 50).unwrap();
        let mut bytes = Vec::new();
        grid.write_to(&mut bytes).unwrap();
        let back = FsomGrid::read_from(bytes.as_slice()).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn empty_sample_set_is_rejected() {
        let mut grid = FsomGrid::new(2, 2, 2, 1);
        assert!(matches!(grid.fit(&[], 10), Err(FsomError::NoSamples)));
        assert!(matches!(grid.batch_update(&[]), Err(FsomError::NoSamples)));
    }

    #[test]
    fn overflowing_inputs_surface_as_non_finite() {
        // Distances square to infinity, memberships degenerate to NaN and
        // the weight check fires instead of reporting convergence.
        let mut grid = FsomGrid::new(2, 2, 1, 3);
        let samples = vec![vec![1e308], vec![-1e308]];
        assert!(matches!(
            grid.fit(&samples, 10),
            Err(FsomError::NonFinite { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut grid = FsomGrid::new(2, 2, 3, 1);
        let samples = [vec![0.0, 1.0]];
        assert!(matches!(
            grid.batch_update(&samples),
            Err(FsomError::DimMismatch {
                expected: 3,
                got: 2
            })
        ));
    }
}
