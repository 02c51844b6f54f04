//! Three-layer softmax classifier with dropout, batch normalization, and L2
//! weight decay, trained by the shared Nesterov-momentum SGD.
//!
//! Layer widths for network input size d: d -> floor(d/2) -> floor(d/4) -> 2.
//! Order: FC1 -> ReLU -> Dropout -> FC2 -> ReLU -> BatchNorm -> FC3 ->
//! softmax. Dropout is inverted (train-time scaling by 1/keep) so inference
//! is a pure pass-through; batch norm uses batch statistics in train mode
//! and running statistics at inference.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga_select::Chromosome;
use crate::linear_model::{resolve_mask, sgd_nesterov_step, SgdConfig, Standardizer};
use crate::panel::LabeledDataset;
use crate::seeding::{derive_seed, derive_seed_indexed};

/// Network hyperparameters: SGD (lr 1e-3, decay 1e-6, momentum 0.9,
/// 20 epochs, batch 128), dropout 0.5, L2 coefficient 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub sgd: SgdConfig,
    pub dropout: f64,
    pub l2: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl Default for DnnConfig {
    fn default() -> Self {
        DnnConfig {
            sgd: SgdConfig {
                initial_lr: 1e-3,
                ..SgdConfig::default()
            },
            dropout: 0.5,
            l2: 0.01,
            bn_epsilon: 1e-3,
            bn_momentum: 0.99,
        }
    }
}

impl DnnConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Contract(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.l2 < 0.0 {
            return Err(Error::Contract(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// The trained network plus the feature mask and standardizer it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnModel {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    w3: Array2<f64>,
    b3: Array1<f64>,
    bn_scale: Array1<f64>,
    bn_shift: Array1<f64>,
    bn_mean: Array1<f64>,
    bn_var: Array1<f64>,
    mask: Vec<usize>,
    input_dim: usize,
    scaler: Standardizer,
    cfg: DnnConfig,
}

struct ForwardCache {
    z1: Array2<f64>,
    a1_dropped: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    bn_xhat: Array2<f64>,
    bn_mu: Array1<f64>,
    bn_var: Array1<f64>,
    probs: Array2<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl DnnModel {
    fn new(width: usize, cfg: &DnnConfig) -> Result<DnnModel> {
        if width < 4 {
            return Err(Error::Architecture(format!(
                "network needs at least 4 input features, got {width}"
            )));
        }
        let h1 = width / 2;
        let h2 = width / 4;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.sgd.seed, "dnn-init"));
        let mut he_uniform = |fan_in: usize, rows: usize, cols: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
        };
        Ok(DnnModel {
            w1: he_uniform(width, width, h1),
            b1: Array1::zeros(h1),
            w2: he_uniform(h1, h1, h2),
            b2: Array1::zeros(h2),
            w3: he_uniform(h2, h2, 2),
            b3: Array1::zeros(2),
            bn_scale: Array1::ones(h2),
            bn_shift: Array1::zeros(h2),
            bn_mean: Array1::zeros(h2),
            bn_var: Array1::ones(h2),
            mask: (0..width).collect(),
            input_dim: width,
            scaler: Standardizer::identity(width),
            cfg: cfg.clone(),
        })
    }

    /// Width of the network's input layer (masked feature count).
    pub fn network_width(&self) -> usize {
        self.w1.nrows()
    }

    /// Full row width expected by [`predict_dnn`].
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn config(&self) -> &DnnConfig {
        &self.cfg
    }

    /// Layer widths (input, hidden 1, hidden 2, output).
    pub fn widths(&self) -> (usize, usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols(), self.w3.ncols())
    }

    /// Forward pass on a batch already in network-input space
    /// (masked and standardized). Train mode draws a dropout mask from
    /// `dropout_rng`, normalizes with batch statistics, and updates the
    /// running statistics; inference mode ignores the RNG and uses running
    /// statistics.
    pub fn forward(
        &mut self,
        batch: ArrayView2<'_, f64>,
        mode: Mode,
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<Array2<f64>> {
        if batch.ncols() != self.network_width() {
            return Err(Error::Shape {
                expected: self.network_width(),
                found: batch.ncols(),
            });
        }
        match mode {
            Mode::Inference => Ok(self.forward_inference(batch)),
            Mode::Train => {
                let dropout = self.sample_dropout_mask(batch.nrows(), dropout_rng);
                let cache = self.forward_train(batch, Some(&dropout), true)?;
                Ok(cache.probs)
            }
        }
    }

    fn sample_dropout_mask(&self, rows: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let keep = 1.0 - self.cfg.dropout;
        let h1 = self.w1.ncols();
        Array2::from_shape_fn((rows, h1), |_| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
    }

    fn forward_inference(&self, batch: ArrayView2<'_, f64>) -> Array2<f64> {
        let a1 = relu(&(batch.dot(&self.w1) + &self.b1));
        let a2 = relu(&(a1.dot(&self.w2) + &self.b2));
        let denom = self.bn_var.mapv(|v| (v + self.cfg.bn_epsilon).sqrt());
        let normalized = (&a2 - &self.bn_mean) / &denom * &self.bn_scale + &self.bn_shift;
        softmax_rows(&(normalized.dot(&self.w3) + &self.b3))
    }

    /// Train-mode forward: batch-statistic batch norm; optional dropout
    /// mask (entries 0 or 1/keep); optionally update running statistics.
    fn forward_train(
        &mut self,
        batch: ArrayView2<'_, f64>,
        dropout: Option<&Array2<f64>>,
        update_running: bool,
    ) -> Result<ForwardCache> {
        let b = batch.nrows() as f64;
        let z1 = batch.dot(&self.w1) + &self.b1;
        let mut a1_dropped = relu(&z1);
        if let Some(mask) = dropout {
            a1_dropped *= mask;
        }
        let z2 = a1_dropped.dot(&self.w2) + &self.b2;
        let a2 = relu(&z2);
        let bn_mu = a2.sum_axis(Axis(0)) / b;
        let centered = &a2 - &bn_mu;
        let bn_var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / b;
        let denom = bn_var.mapv(|v| (v + self.cfg.bn_epsilon).sqrt());
        let bn_xhat = &centered / &denom;
        let normalized = &bn_xhat * &self.bn_scale + &self.bn_shift;
        let z3 = normalized.dot(&self.w3) + &self.b3;
        let probs = softmax_rows(&z3);
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence("non-finite activation in forward pass".into()));
        }
        if update_running {
            let m = self.cfg.bn_momentum;
            self.bn_mean = &self.bn_mean * m + &bn_mu * (1.0 - m);
            self.bn_var = &self.bn_var * m + &bn_var * (1.0 - m);
        }
        Ok(ForwardCache {
            z1,
            a1_dropped,
            z2,
            a2,
            bn_xhat,
            bn_mu,
            bn_var,
            probs,
        })
    }

    /// Mean categorical cross-entropy plus the L2 penalty over FC weights.
    fn loss_from_probs(&self, probs: &Array2<f64>, y: &[u8]) -> f64 {
        let eps = 1e-12;
        let ce: f64 = y
            .iter()
            .enumerate()
            .map(|(i, &label)| -probs[[i, label as usize]].max(eps).ln())
            .sum::<f64>()
            / y.len() as f64;
        let penalty = self.cfg.l2
            * (self.w1.mapv(|w| w * w).sum()
                + self.w2.mapv(|w| w * w).sum()
                + self.w3.mapv(|w| w * w).sum());
        ce + penalty
    }

    /// Backward pass over a cached train-mode forward. Gradient tensor
    /// order matches [`DnnModel::params_flat`].
    fn backward(
        &self,
        batch: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        y: &[u8],
        dropout: Option<&Array2<f64>>,
    ) -> Vec<Array2<f64>> {
        let b = batch.nrows() as f64;
        let mut d_z3 = cache.probs.clone();
        for (i, &label) in y.iter().enumerate() {
            d_z3[[i, label as usize]] -= 1.0;
        }
        d_z3 /= b;

        let normalized = &cache.bn_xhat * &self.bn_scale + &self.bn_shift;
        let d_w3 = normalized.t().dot(&d_z3) + &self.w3 * (2.0 * self.cfg.l2);
        let d_b3 = d_z3.sum_axis(Axis(0));
        let d_norm = d_z3.dot(&self.w3.t());

        let d_scale = (&d_norm * &cache.bn_xhat).sum_axis(Axis(0));
        let d_shift = d_norm.sum_axis(Axis(0));
        let d_xhat = &d_norm * &self.bn_scale;
        let centered = &cache.a2 - &cache.bn_mu;
        let inv_std = cache.bn_var.mapv(|v| 1.0 / (v + self.cfg.bn_epsilon).sqrt());
        let d_var = (&d_xhat * &centered).sum_axis(Axis(0))
            * inv_std.mapv(|s| -0.5 * s * s * s);
        let d_mu = d_xhat.sum_axis(Axis(0)) * inv_std.mapv(|s| -s)
            + &d_var * (centered.sum_axis(Axis(0)) * (-2.0 / b));
        let d_a2 = &d_xhat * &inv_std + &centered * &d_var * (2.0 / b) + &d_mu / b;

        let d_z2 = d_a2 * cache.z2.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let d_w2 = cache.a1_dropped.t().dot(&d_z2) + &self.w2 * (2.0 * self.cfg.l2);
        let d_b2 = d_z2.sum_axis(Axis(0));
        let mut d_a1 = d_z2.dot(&self.w2.t());
        if let Some(mask) = dropout {
            d_a1 *= mask;
        }
        let d_z1 = d_a1 * cache.z1.mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
        let d_w1 = batch.t().dot(&d_z1) + &self.w1 * (2.0 * self.cfg.l2);
        let d_b1 = d_z1.sum_axis(Axis(0));

        vec![
            d_w1,
            to_matrix(d_b1),
            d_w2,
            to_matrix(d_b2),
            to_matrix(d_scale),
            to_matrix(d_shift),
            d_w3,
            to_matrix(d_b3),
        ]
    }

    /// Trainable parameters flattened in the order
    /// w1, b1, w2, b2, bn_scale, bn_shift, w3, b3.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.param_tensors() {
            out.extend(t);
        }
        out
    }

    fn param_tensors(&self) -> Vec<Vec<f64>> {
        vec![
            self.w1.iter().copied().collect(),
            self.b1.to_vec(),
            self.w2.iter().copied().collect(),
            self.b2.to_vec(),
            self.bn_scale.to_vec(),
            self.bn_shift.to_vec(),
            self.w3.iter().copied().collect(),
            self.b3.to_vec(),
        ]
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected: usize = self.param_tensors().iter().map(Vec::len).sum();
        if flat.len() != expected {
            return Err(Error::Shape {
                expected,
                found: flat.len(),
            });
        }
        let mut offset = 0;
        let mut take = |len: usize| {
            let slice = &flat[offset..offset + len];
            offset += len;
            slice.to_vec()
        };
        self.w1 = Array2::from_shape_vec(self.w1.dim(), take(self.w1.len())).unwrap();
        self.b1 = Array1::from_vec(take(self.b1.len()));
        self.w2 = Array2::from_shape_vec(self.w2.dim(), take(self.w2.len())).unwrap();
        self.b2 = Array1::from_vec(take(self.b2.len()));
        self.bn_scale = Array1::from_vec(take(self.bn_scale.len()));
        self.bn_shift = Array1::from_vec(take(self.bn_shift.len()));
        self.w3 = Array2::from_shape_vec(self.w3.dim(), take(self.w3.len())).unwrap();
        self.b3 = Array1::from_vec(take(self.b3.len()));
        Ok(())
    }

    /// Loss and flat analytic gradients on a fixed batch in network-input
    /// space, with dropout disabled and train-mode batch norm; running
    /// statistics are untouched, so this is a pure function of the
    /// parameters (suitable for finite-difference checks).
    pub fn loss_and_grads(&self, x: &Array2<f64>, y: &[u8]) -> Result<(f64, Vec<f64>)> {
        let mut probe = self.clone();
        let cache = probe.forward_train(x.view(), None, false)?;
        let loss = self.loss_from_probs(&cache.probs, y);
        let grads = self.backward(x.view(), &cache, y, None);
        Ok((loss, grads.into_iter().flatten().collect()))
    }
}

fn to_matrix(v: Array1<f64>) -> Array2<f64> {
    let len = v.len();
    v.into_shape_with_order((1, len)).unwrap()
}

/// Train the network on (optionally masked) standardized features.
pub fn train_dnn(
    train: &LabeledDataset,
    cfg: &DnnConfig,
    mask: Option<&Chromosome>,
) -> Result<DnnModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    if !train.has_both_classes() {
        return Err(Error::Training("training set contains a single class".into()));
    }
    let input_dim = train.n_features();
    let mask_idx = resolve_mask(input_dim, mask)?;
    let width = mask_idx.len();
    if width < 4 {
        return Err(Error::Architecture(format!(
            "mask selects {width} features; the architecture needs at least 4"
        )));
    }
    let n = train.len();
    let masked: Vec<Vec<f64>> = train
        .x
        .iter()
        .map(|row| mask_idx.iter().map(|&j| row[j]).collect())
        .collect();
    let scaler = Standardizer::fit(&masked);
    let mut flat = Vec::with_capacity(n * width);
    let mut buf = vec![0.0; width];
    for row in &masked {
        scaler.transform_into(row, &mut buf);
        flat.extend_from_slice(&buf);
    }
    let x = Array2::from_shape_vec((n, width), flat).unwrap();

    let mut model = DnnModel::new(width, cfg)?;
    model.mask = mask_idx;
    model.input_dim = input_dim;
    model.scaler = scaler;

    let mut velocities: Vec<Vec<f64>> = model
        .param_tensors()
        .iter()
        .map(|t| vec![0.0; t.len()])
        .collect();
    let mut dropout_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(cfg.sgd.seed, "dnn-dropout"));
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..cfg.sgd.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_indexed(
            cfg.sgd.seed,
            "dnn-epoch",
            epoch as u64,
        ));
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.sgd.batch_size) {
            let mut batch = Array2::zeros((chunk.len(), width));
            for (bi, &i) in chunk.iter().enumerate() {
                batch.row_mut(bi).assign(&x.row(i));
            }
            let labels: Vec<u8> = chunk.iter().map(|&i| train.y[i]).collect();
            let dropout = model.sample_dropout_mask(chunk.len(), &mut dropout_rng);
            let cache = model.forward_train(batch.view(), Some(&dropout), true)?;
            let loss = model.loss_from_probs(&cache.probs, &labels);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            let grads = model.backward(batch.view(), &cache, &labels, Some(&dropout));
            let lr = cfg.sgd.lr_at(step);

            let mut tensors = model.param_tensors();
            for ((tensor, grad), velocity) in
                tensors.iter_mut().zip(&grads).zip(velocities.iter_mut())
            {
                let grad_flat: Vec<f64> = grad.iter().copied().collect();
                sgd_nesterov_step(tensor, &grad_flat, velocity, lr, cfg.sgd.momentum)?;
            }
            let flat: Vec<f64> = tensors.into_iter().flatten().collect();
            model.set_params_flat(&flat)?;
            step += 1;
        }
    }
    Ok(model)
}

/// Inference scores: the class-1 softmax component per full-width row.
pub fn predict_dnn(model: &DnnModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = model.network_width();
    let mut flat = Vec::with_capacity(rows.len() * width);
    let mut masked = vec![0.0; width];
    let mut buf = vec![0.0; width];
    for row in rows {
        if row.len() != model.input_dim {
            return Err(Error::Shape {
                expected: model.input_dim,
                found: row.len(),
            });
        }
        for (slot, &j) in masked.iter_mut().zip(&model.mask) {
            *slot = row[j];
        }
        model.scaler.transform_into(&masked, &mut buf);
        flat.extend_from_slice(&buf);
    }
    let x = Array2::from_shape_vec((rows.len(), width), flat).unwrap();
    let probs = model.forward_inference(x.view());
    Ok(probs.column(1).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use crate::test_support::dataset_from_xy;

    fn default_cfg(seed: u64) -> DnnConfig {
        DnnConfig {
            sgd: SgdConfig {
                initial_lr: 1e-3,
                seed,
                ..SgdConfig::default()
            },
            ..DnnConfig::default()
        }
    }

    /// Label = indicator of a linear threshold on the first 8 features.
    fn threshold_dataset(n: usize, d: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let score: f64 = row.iter().take(8).sum();
            y.push((score > 0.0) as u8);
            x.push(row);
        }
        dataset_from_xy(x, y)
    }

    #[test]
    fn widths_follow_floor_halving() {
        let model = DnnModel::new(10, &default_cfg(0)).unwrap();
        assert_eq!(model.widths(), (10, 5, 2, 2));
        let model = DnnModel::new(244, &default_cfg(0)).unwrap();
        assert_eq!(model.widths(), (244, 122, 61, 2));
        assert!(DnnModel::new(3, &default_cfg(0)).is_err());
    }

    #[test]
    fn forward_rows_sum_to_one() {
        let mut model = DnnModel::new(8, &default_cfg(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = Array2::from_shape_fn((16, 8), |_| rng.gen_range(-2.0..2.0));
        for mode in [Mode::Train, Mode::Inference] {
            let mut drop_rng = ChaCha8Rng::seed_from_u64(3);
            let out = model.forward(batch.view(), mode, &mut drop_rng).unwrap();
            for row in out.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
            }
        }
    }

    #[test]
    fn zero_weights_give_uniform_scores() {
        let mut model = DnnModel::new(8, &default_cfg(1)).unwrap();
        let zeros = vec![0.0; model.params_flat().len()];
        model.set_params_flat(&zeros).unwrap();
        let batch = Array2::from_shape_fn((4, 8), |(i, j)| (i + j) as f64);
        let out = model.forward_inference(batch.view());
        for row in out.rows() {
            assert!((row[0] - 0.5).abs() < 1e-12);
            assert!((row[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn train_forward_deterministic_per_dropout_seed() {
        let mut model = DnnModel::new(12, &default_cfg(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = Array2::from_shape_fn((32, 12), |_| rng.gen_range(-1.0..1.0));
        let run = |model: &mut DnnModel, seed: u64| {
            let mut drop_rng = ChaCha8Rng::seed_from_u64(seed);
            model.forward(batch.view(), Mode::Train, &mut drop_rng).unwrap()
        };
        let a = run(&mut model, 7);
        let b = run(&mut model, 7);
        let c = run(&mut model, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    /// Backpropagation matches central finite differences within 1e-4
    /// relative error (dropout off, batch-norm in train mode).
    #[test]
    fn gradients_match_finite_differences() {
        let cfg = default_cfg(6);
        let model = DnnModel::new(8, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((12, 8), |_| rng.gen_range(-1.5..1.5));
        let y: Vec<u8> = (0..12).map(|_| rng.gen_range(0..=1)).collect();
        let (_, grads) = model.loss_and_grads(&x, &y).unwrap();
        let params = model.params_flat();
        let h = 1e-5;
        let mut checked = 0;
        for j in (0..params.len()).step_by(7) {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut pp = params.clone();
            pp[j] += h;
            plus.set_params_flat(&pp).unwrap();
            let mut pm = params.clone();
            pm[j] -= h;
            minus.set_params_flat(&pm).unwrap();
            let (lp, _) = plus.loss_and_grads(&x, &y).unwrap();
            let (lm, _) = minus.loss_and_grads(&x, &y).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grads[j] - fd).abs() / fd.abs().max(1e-6);
            assert!(rel < 1e-4, "param {j}: analytic {} vs fd {fd}", grads[j]);
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn batchnorm_train_mode_standardizes_features() {
        // check the normalized pre-scale activations: mean 0, var 1
        let mut model = DnnModel::new(16, &default_cfg(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let batch = Array2::from_shape_fn((256, 16), |_| rng.gen_range(-1.0..1.0));
        let cache = model.forward_train(batch.view(), None, false).unwrap();
        let b = batch.nrows() as f64;
        for col in cache.bn_xhat.columns() {
            let mean = col.sum() / b;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / b;
            assert!(mean.abs() < 1e-6, "mean {mean}");
            // normalization divides by sqrt(var + eps), so var is slightly < 1
            let expected = cache.bn_var.iter().cloned().fold(0.0, f64::max);
            assert!((var - 1.0).abs() < 1e-2, "var {var} (max raw var {expected})");
        }
    }

    #[test]
    fn dropout_zeroes_about_half_in_train_mode() {
        let model = DnnModel::new(32, &default_cfg(10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mask = model.sample_dropout_mask(512, &mut rng);
        let zeros = mask.iter().filter(|&&v| v == 0.0).count();
        let fraction = zeros as f64 / mask.len() as f64;
        assert!((fraction - 0.5).abs() < 0.05, "dropout fraction {fraction}");
        // surviving entries are inverted-scaled
        assert!(mask.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn training_is_deterministic() {
        let ds = threshold_dataset(300, 10, 12);
        let a = train_dnn(&ds, &default_cfg(13), None).unwrap();
        let b = train_dnn(&ds, &default_cfg(13), None).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        assert_eq!(a.bn_mean, b.bn_mean);
    }

    #[test]
    fn held_out_auc_on_linear_threshold_data() {
        let train = threshold_dataset(500, 12, 14);
        let test = threshold_dataset(400, 12, 15);
        let model = train_dnn(&train, &default_cfg(16), None).unwrap();
        let scores = predict_dnn(&model, &test.x).unwrap();
        let a = auc(&scores, &test.y).unwrap();
        assert!(a >= 0.95, "held-out AUC {a}");
    }

    #[test]
    fn l2_penalty_trades_training_fit() {
        let ds = threshold_dataset(400, 8, 17);
        let with_l2 = train_dnn(&ds, &default_cfg(18), None).unwrap();
        let mut cfg_free = default_cfg(18);
        cfg_free.l2 = 0.0;
        let without_l2 = train_dnn(&ds, &cfg_free, None).unwrap();
        let ce = |model: &DnnModel| {
            let scores = predict_dnn(model, &ds.x).unwrap();
            crate::linear_model::mean_bce(&scores, &ds.y)
        };
        assert!(ce(&without_l2) <= ce(&with_l2) + 1e-9);
    }

    #[test]
    fn inference_is_batch_size_invariant() {
        let ds = threshold_dataset(300, 10, 19);
        let model = train_dnn(&ds, &default_cfg(20), None).unwrap();
        let all = predict_dnn(&model, &ds.x).unwrap();
        for (i, row) in ds.x.iter().enumerate().take(40) {
            let single = predict_dnn(&model, std::slice::from_ref(row)).unwrap();
            assert!((single[0] - all[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_lie_in_open_unit_interval() {
        let ds = threshold_dataset(200, 8, 21);
        let model = train_dnn(&ds, &default_cfg(22), None).unwrap();
        let scores = predict_dnn(&model, &ds.x).unwrap();
        assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn rejects_narrow_mask() {
        let ds = threshold_dataset(100, 8, 23);
        let mask = Chromosome::new(vec![true, true, true, false, false, false, false, false])
            .unwrap();
        assert!(matches!(
            train_dnn(&ds, &default_cfg(24), Some(&mask)),
            Err(Error::Architecture(_))
        ));
    }
}
