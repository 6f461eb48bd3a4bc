//! Per-cluster GRU regression with a linear readout.
//!
//! Cells use the standard gated recurrence (sigmoid update/reset gates, tanh
//! candidate, `h' = (1-z) h + z c`), trained by full-batch gradient descent
//! on mean squared error with exact backpropagation through time. Clusters
//! with too few training windows fall back to one model trained on all data.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GruError {
    #[error("no training windows supplied")]
    NoWindows,
    #[error("input of dimension {got} does not match cell input dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("training diverged (non-finite loss) on cluster {cluster:?} at epoch {epoch}")]
    Diverged {
        cluster: Option<usize>,
        epoch: usize,
    },
    #[error("non-finite input value")]
    NonFiniteInput,
    #[error("malformed model bytes: {0}")]
    BadBytes(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// GRU cell parameters. Each gate has an input matrix (`hidden x input`), a
/// recurrent matrix (`hidden x hidden`) and a bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub wz: Vec<f64>,
    pub uz: Vec<f64>,
    pub bz: Vec<f64>,
    pub wr: Vec<f64>,
    pub ur: Vec<f64>,
    pub br: Vec<f64>,
    pub wh: Vec<f64>,
    pub uh: Vec<f64>,
    pub bh: Vec<f64>,
}

impl GruCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            wz: vec![0.0; hidden_dim * input_dim],
            uz: vec![0.0; hidden_dim * hidden_dim],
            bz: vec![0.0; hidden_dim],
            wr: vec![0.0; hidden_dim * input_dim],
            ur: vec![0.0; hidden_dim * hidden_dim],
            br: vec![0.0; hidden_dim],
            wh: vec![0.0; hidden_dim * input_dim],
            uh: vec![0.0; hidden_dim * hidden_dim],
            bh: vec![0.0; hidden_dim],
        }
    }

    /// Seeded uniform initialization scaled by 1/sqrt(hidden_dim).
    pub fn seeded(input_dim: usize, hidden_dim: usize, rng: &mut StdRng) -> Self {
        let scale = 1.0 / (hidden_dim as f64).sqrt();
        let mut cell = Self::zeros(input_dim, hidden_dim);
        for params in [
            &mut cell.wz,
            &mut cell.uz,
            &mut cell.wr,
            &mut cell.ur,
            &mut cell.wh,
            &mut cell.uh,
        ] {
            for v in params.iter_mut() {
                *v = rng.random_range(-scale..scale);
            }
        }
        cell
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<f64>();
    }
}

fn mat_t_vec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        for (o, &a) in out.iter_mut().zip(row.iter()) {
            *o += a * v[r];
        }
    }
    out
}

fn outer_acc(grad: &mut [f64], a: &[f64], b: &[f64]) {
    for (i, &ai) in a.iter().enumerate() {
        let row = &mut grad[i * b.len()..(i + 1) * b.len()];
        for (g, &bj) in row.iter_mut().zip(b.iter()) {
            *g += ai * bj;
        }
    }
}

/// Per-step activations cached by the forward pass.
struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
}

/// One GRU step: gates from the input and prior state, then the convex mix
/// `h' = (1-z) h + z c`.
pub fn gru_step(cell: &GruCell, x: &[f64], h: &[f64]) -> Result<Vec<f64>, GruError> {
    if x.len() != cell.input_dim {
        return Err(GruError::DimMismatch {
            expected: cell.input_dim,
            got: x.len(),
        });
    }
    if x.iter().chain(h.iter()).any(|v| !v.is_finite()) {
        return Err(GruError::NonFiniteInput);
    }
    let (next, _) = step_with_cache(cell, x, h);
    Ok(next)
}

fn step_with_cache(cell: &GruCell, x: &[f64], h: &[f64]) -> (Vec<f64>, StepCache) {
    let n = cell.hidden_dim;
    let mut az = cell.bz.clone();
    mat_vec(&cell.wz, n, cell.input_dim, x, &mut az);
    mat_vec(&cell.uz, n, n, h, &mut az);
    let z: Vec<f64> = az.iter().map(|&a| sigmoid(a)).collect();

    let mut ar = cell.br.clone();
    mat_vec(&cell.wr, n, cell.input_dim, x, &mut ar);
    mat_vec(&cell.ur, n, n, h, &mut ar);
    let r: Vec<f64> = ar.iter().map(|&a| sigmoid(a)).collect();

    let gated: Vec<f64> = r.iter().zip(h.iter()).map(|(&ri, &hi)| ri * hi).collect();
    let mut ah = cell.bh.clone();
    mat_vec(&cell.wh, n, cell.input_dim, x, &mut ah);
    mat_vec(&cell.uh, n, n, &gated, &mut ah);
    let c: Vec<f64> = ah.iter().map(|&a| a.tanh()).collect();

    let next: Vec<f64> = (0..n).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
    let cache = StepCache {
        h_prev: h.to_vec(),
        z,
        r,
        c,
    };
    (next, cache)
}

/// A GRU cell plus linear readout; the unit every cluster model trains.
#[derive(Debug, Clone, PartialEq)]
pub struct GruNet {
    pub cell: GruCell,
    pub readout_w: Vec<f64>,
    pub readout_b: f64,
}

/// Gradients of the full loss with respect to every parameter, in the same
/// layout as [`GruNet`].
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub cell: GruCell,
    pub readout_w: Vec<f64>,
    pub readout_b: f64,
}

/// One supervised example: an input sequence and the next value to predict.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    pub cluster: usize,
    pub inputs: Vec<Vec<f64>>,
    pub target: f64,
}

impl GruNet {
    pub fn seeded(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let cell = GruCell::seeded(input_dim, hidden_dim, &mut rng);
        let scale = 1.0 / (hidden_dim as f64).sqrt();
        let readout_w = (0..hidden_dim)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Self {
            cell,
            readout_w,
            readout_b: 0.0,
        }
    }

    /// Runs the sequence from a zero state and applies the linear readout to
    /// the final hidden state.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<f64, GruError> {
        if inputs.is_empty() {
            return Err(GruError::EmptySequence);
        }
        let mut h = vec![0.0; self.cell.hidden_dim];
        for x in inputs {
            h = gru_step(&self.cell, x, &h)?;
        }
        Ok(dot(&self.readout_w, &h) + self.readout_b)
    }

    /// Mean squared error over a batch.
    pub fn loss(&self, batch: &[TrainingWindow]) -> Result<f64, GruError> {
        if batch.is_empty() {
            return Err(GruError::NoWindows);
        }
        let mut total = 0.0;
        for window in batch {
            let err = self.predict(&window.inputs)? - window.target;
            total += err * err;
        }
        Ok(total / batch.len() as f64)
    }

    /// Full-batch loss and exact gradients via backpropagation through time.
    pub fn loss_and_gradients(
        &self,
        batch: &[TrainingWindow],
    ) -> Result<(f64, GruGrads), GruError> {
        if batch.is_empty() {
            return Err(GruError::NoWindows);
        }
        let n = self.cell.hidden_dim;
        let mut grads = GruGrads {
            cell: GruCell::zeros(self.cell.input_dim, n),
            readout_w: vec![0.0; n],
            readout_b: 0.0,
        };
        let mut total = 0.0;
        let batch_len = batch.len() as f64;
        for window in batch {
            if window.inputs.is_empty() {
                return Err(GruError::EmptySequence);
            }
            // Forward with caches.
            let mut h = vec![0.0; n];
            let mut caches = Vec::with_capacity(window.inputs.len());
            for x in &window.inputs {
                if x.len() != self.cell.input_dim {
                    return Err(GruError::DimMismatch {
                        expected: self.cell.input_dim,
                        got: x.len(),
                    });
                }
                let (next, cache) = step_with_cache(&self.cell, x, &h);
                caches.push(cache);
                h = next;
            }
            let prediction = dot(&self.readout_w, &h) + self.readout_b;
            let err = prediction - window.target;
            total += err * err;

            // d(loss)/d(prediction) for the mean over the batch.
            let g = 2.0 * err / batch_len;
            for (gw, &hi) in grads.readout_w.iter_mut().zip(h.iter()) {
                *gw += g * hi;
            }
            grads.readout_b += g;

            let mut dh: Vec<f64> = self.readout_w.iter().map(|&w| g * w).collect();
            for (x, cache) in window.inputs.iter().zip(caches.iter()).rev() {
                let StepCache { h_prev, z, r, c } = cache;
                let dz: Vec<f64> = (0..n).map(|i| dh[i] * (c[i] - h_prev[i])).collect();
                let dc: Vec<f64> = (0..n).map(|i| dh[i] * z[i]).collect();
                let dah: Vec<f64> = (0..n).map(|i| dc[i] * (1.0 - c[i] * c[i])).collect();
                let daz: Vec<f64> = (0..n).map(|i| dz[i] * z[i] * (1.0 - z[i])).collect();
                let uh_back = mat_t_vec(&self.cell.uh, n, n, &dah);
                let dr: Vec<f64> = (0..n).map(|i| uh_back[i] * h_prev[i]).collect();
                let dar: Vec<f64> = (0..n).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();

                let gated: Vec<f64> = (0..n).map(|i| r[i] * h_prev[i]).collect();
                outer_acc(&mut grads.cell.wh, &dah, x);
                outer_acc(&mut grads.cell.uh, &dah, &gated);
                acc(&mut grads.cell.bh, &dah);
                outer_acc(&mut grads.cell.wz, &daz, x);
                outer_acc(&mut grads.cell.uz, &daz, h_prev);
                acc(&mut grads.cell.bz, &daz);
                outer_acc(&mut grads.cell.wr, &dar, x);
                outer_acc(&mut grads.cell.ur, &dar, h_prev);
                acc(&mut grads.cell.br, &dar);

                let uz_back = mat_t_vec(&self.cell.uz, n, n, &daz);
                let ur_back = mat_t_vec(&self.cell.ur, n, n, &dar);
                dh = (0..n)
                    .map(|i| dh[i] * (1.0 - z[i]) + uz_back[i] + ur_back[i] + uh_back[i] * r[i])
                    .collect();
            }
        }
        Ok((total / batch_len, grads))
    }

    pub fn apply_gradients(&mut self, grads: &GruGrads, learning_rate: f64) {
        for (p, g) in self
            .param_slices_mut()
            .into_iter()
            .zip(grads.param_slices())
        {
            for (pv, gv) in p.iter_mut().zip(g.iter()) {
                *pv -= learning_rate * gv;
            }
        }
        self.readout_b -= learning_rate * grads.readout_b;
    }

    /// Flattened parameter vector in a fixed order; used by the
    /// finite-difference checks and by serialization.
    pub fn to_param_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.param_slices() {
            out.extend_from_slice(s);
        }
        out.push(self.readout_b);
        out
    }

    pub fn set_param_vec(&mut self, params: &[f64]) {
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&params[offset..offset + s.len()]);
            offset += s.len();
        }
        self.readout_b = params[offset];
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum::<usize>() + 1
    }

    fn param_slices(&self) -> [&[f64]; 10] {
        [
            &self.cell.wz,
            &self.cell.uz,
            &self.cell.bz,
            &self.cell.wr,
            &self.cell.ur,
            &self.cell.br,
            &self.cell.wh,
            &self.cell.uh,
            &self.cell.bh,
            &self.readout_w,
        ]
    }

    fn param_slices_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.cell.wz,
            &mut self.cell.uz,
            &mut self.cell.bz,
            &mut self.cell.wr,
            &mut self.cell.ur,
            &mut self.cell.br,
            &mut self.cell.wh,
            &mut self.cell.uh,
            &mut self.cell.bh,
            &mut self.readout_w,
        ]
    }
}

impl GruGrads {
    fn param_slices(&self) -> [&[f64]; 10] {
        [
            &self.cell.wz,
            &self.cell.uz,
            &self.cell.bz,
            &self.cell.wr,
            &self.cell.ur,
            &self.cell.br,
            &self.cell.wh,
            &self.cell.uh,
            &self.cell.bh,
            &self.readout_w,
        ]
    }

    /// Flattened gradient vector matching [`GruNet::to_param_vec`].
    pub fn to_param_vec(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for s in self.param_slices() {
            out.extend_from_slice(s);
        }
        out.push(self.readout_b);
        out
    }
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x * y).sum()
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct GruHyper {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Clusters with fewer windows than this use the fallback model.
    pub min_cluster_samples: usize,
    pub seed: u64,
}

impl Default for GruHyper {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            epochs: 200,
            learning_rate: 1e-2,
            min_cluster_samples: 20,
            seed: 0,
        }
    }
}

/// A trained model plus its per-epoch loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    pub net: GruNet,
    pub loss_curve: Vec<f64>,
    pub samples: usize,
}

/// One model per sufficiently populated cluster plus a fallback trained on
/// all windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModelSet {
    pub models: BTreeMap<usize, GruModel>,
    pub fallback: GruModel,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl ClusterModelSet {
    /// Predicts with the cluster's dedicated model, falling back to the
    /// pooled model for unknown or sparse clusters.
    pub fn predict(&self, cluster: usize, inputs: &[Vec<f64>]) -> Result<f64, GruError> {
        self.models
            .get(&cluster)
            .unwrap_or(&self.fallback)
            .net
            .predict(inputs)
    }

    pub fn dedicated_clusters(&self) -> impl Iterator<Item = usize> + '_ {
        self.models.keys().copied()
    }

    /// Blob layout: dims header, model count, then per model the cluster id
    /// (`u32::MAX` marks the fallback), parameters and loss curve.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), GruError> {
        w.write_all(&(self.input_dim as u32).to_le_bytes())?;
        w.write_all(&(self.hidden_dim as u32).to_le_bytes())?;
        w.write_all(&(self.models.len() as u32).to_le_bytes())?;
        let fallback_entry = (u32::MAX, &self.fallback);
        let entries = self
            .models
            .iter()
            .map(|(&id, m)| (id as u32, m))
            .chain(std::iter::once(fallback_entry));
        for (id, model) in entries {
            w.write_all(&id.to_le_bytes())?;
            w.write_all(&(model.samples as u32).to_le_bytes())?;
            let params = model.net.to_param_vec();
            w.write_all(&(params.len() as u32).to_le_bytes())?;
            for v in &params {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(model.loss_curve.len() as u32).to_le_bytes())?;
            for v in &model.loss_curve {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, GruError> {
        let input_dim = read_u32(&mut r)? as usize;
        let hidden_dim = read_u32(&mut r)? as usize;
        let count = read_u32(&mut r)? as usize;
        let mut models = BTreeMap::new();
        let mut fallback = None;
        for _ in 0..count + 1 {
            let id = read_u32(&mut r)?;
            let samples = read_u32(&mut r)? as usize;
            let param_len = read_u32(&mut r)? as usize;
            let mut net = GruNet::seeded(input_dim, hidden_dim, 0);
            if param_len != net.param_count() {
                return Err(GruError::BadBytes(format!(
                    "expected {} parameters, found {param_len}",
                    net.param_count()
                )));
            }
            let mut params = vec![0.0f64; param_len];
            read_f64s(&mut r, &mut params)?;
            net.set_param_vec(&params);
            let curve_len = read_u32(&mut r)? as usize;
            let mut loss_curve = vec![0.0f64; curve_len];
            read_f64s(&mut r, &mut loss_curve)?;
            let model = GruModel {
                net,
                loss_curve,
                samples,
            };
            if id == u32::MAX {
                fallback = Some(model);
            } else {
                models.insert(id as usize, model);
            }
        }
        Ok(Self {
            models,
            fallback: fallback
                .ok_or_else(|| GruError::BadBytes("missing fallback model".into()))?,
            input_dim,
            hidden_dim,
        })
    }

    /// Emits `cluster,epoch,loss` rows; the fallback reports as `fallback`.
    pub fn write_loss_curves_csv<W: Write>(&self, mut w: W) -> Result<(), GruError> {
        writeln!(w, "cluster,epoch,loss")?;
        for (id, model) in &self.models {
            for (epoch, loss) in model.loss_curve.iter().enumerate() {
                writeln!(w, "{id},{epoch},{loss}")?;
            }
        }
        for (epoch, loss) in self.fallback.loss_curve.iter().enumerate() {
            writeln!(w, "fallback,{epoch},{loss}")?;
        }
        Ok(())
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, GruError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, out: &mut [f64]) -> Result<(), GruError> {
    let mut buf = [0u8; 8];
    for v in out.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok(())
}

fn train_one(
    windows: &[&TrainingWindow],
    input_dim: usize,
    hyper: &GruHyper,
    seed: u64,
    cluster: Option<usize>,
) -> Result<GruModel, GruError> {
    let mut net = GruNet::seeded(input_dim, hyper.hidden_dim, seed);
    let batch: Vec<TrainingWindow> = windows.iter().map(|&w| w.clone()).collect();
    let mut loss_curve = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let (loss, grads) = net.loss_and_gradients(&batch)?;
        if !loss.is_finite() {
            return Err(GruError::Diverged { cluster, epoch });
        }
        loss_curve.push(loss);
        net.apply_gradients(&grads, hyper.learning_rate);
    }
    Ok(GruModel {
        net,
        loss_curve,
        samples: windows.len(),
    })
}

/// Trains one model per sufficiently populated cluster and a fallback over
/// all windows. Deterministic under the hyperparameter seed.
pub fn train_models(
    windows: &[TrainingWindow],
    hyper: &GruHyper,
) -> Result<ClusterModelSet, GruError> {
    if windows.is_empty() {
        return Err(GruError::NoWindows);
    }
    let input_dim = windows[0]
        .inputs
        .first()
        .ok_or(GruError::EmptySequence)?
        .len();
    let mut by_cluster: BTreeMap<usize, Vec<&TrainingWindow>> = BTreeMap::new();
    for window in windows {
        by_cluster.entry(window.cluster).or_default().push(window);
    }
    let all: Vec<&TrainingWindow> = windows.iter().collect();
    let fallback = train_one(&all, input_dim, hyper, hyper.seed, None)?;
    let mut models = BTreeMap::new();
    for (&cluster, members) in &by_cluster {
        if members.len() >= hyper.min_cluster_samples {
            let seed = hyper.seed ^ (cluster as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15);
            models.insert(
                cluster,
                train_one(members, input_dim, hyper, seed, Some(cluster))?,
            );
        }
    }
    Ok(ClusterModelSet {
        models,
        fallback,
        input_dim,
        hidden_dim: hyper.hidden_dim,
    })
}
