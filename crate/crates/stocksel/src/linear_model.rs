//! Logistic regression trained by minibatch SGD with Nesterov momentum and
//! learning-rate decay. Also provides the optimizer step and the feature
//! standardizer shared with the neural network.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga_select::Chromosome;
use crate::panel::LabeledDataset;
use crate::seeding::derive_seed_indexed;

/// Minibatch SGD hyperparameters. Defaults are the logistic-regression
/// configuration: lr 1e-2, decay 1e-6, momentum 0.9, 20 epochs, batch 128.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub initial_lr: f64,
    pub decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            initial_lr: 1e-2,
            decay: 1e-6,
            momentum: 0.9,
            epochs: 20,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Contract(format!(
                "initial_lr must be positive, got {}",
                self.initial_lr
            )));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(Error::Contract(format!("decay must be >= 0, got {}", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Contract(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Contract("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate at global step `k` (decaying as 1 / (1 + decay * k)).
    pub fn lr_at(&self, step: usize) -> f64 {
        self.initial_lr / (1.0 + self.decay * step as f64)
    }
}

/// One Nesterov-momentum update, in place:
/// `v' = momentum * v - lr * g`, `p' = p + momentum * v' - lr * g`.
pub fn sgd_nesterov_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::Shape {
            expected: params.len(),
            found: grads.len().max(velocity.len()),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence("non-finite gradient in optimizer step".into()));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v - lr * g;
        *p += momentum * *v - lr * g;
    }
    Ok(())
}

/// Per-column standardization fitted on training data; columns with zero
/// spread transform to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fit on rows (population std).
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let width = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for row in rows {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; width];
        for row in rows {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let std = var.iter().map(|&s| (s / n).sqrt()).collect();
        Standardizer { mean, std }
    }

    /// Pass-through transform (mean 0, std 1).
    pub fn identity(width: usize) -> Standardizer {
        Standardizer {
            mean: vec![0.0; width],
            std: vec![1.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = if self.std[j] > 0.0 {
                (row[j] - self.mean[j]) / self.std[j]
            } else {
                0.0
            };
        }
    }
}

/// Extract the masked columns of each row into a flat row-major matrix.
pub(crate) fn mask_rows(rows: &[Vec<f64>], mask: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * mask.len());
    for row in rows {
        for &j in mask {
            out.push(row[j]);
        }
    }
    out
}

pub(crate) fn resolve_mask(width: usize, mask: Option<&Chromosome>) -> Result<Vec<usize>> {
    match mask {
        None => Ok((0..width).collect()),
        Some(c) => {
            if c.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    found: c.len(),
                });
            }
            let idx = c.selected_indices();
            if idx.is_empty() {
                return Err(Error::Contract("mask selects no features".into()));
            }
            Ok(idx)
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z.clamp(-500.0, 500.0)).exp())
}

/// Logistic model: score = sigma(weights . x + intercept) over masked,
/// standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    weights: Vec<f64>,
    intercept: f64,
    /// Original feature indices the model consumes.
    mask: Vec<usize>,
    /// Full input width expected by `predict_lr`.
    input_dim: usize,
    scaler: Standardizer,
    cfg: SgdConfig,
}

impl LrModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &SgdConfig {
        &self.cfg
    }

    fn score_one(&self, row: &[f64], buf: &mut Vec<f64>) -> Result<f64> {
        if row.len() != self.input_dim {
            return Err(Error::Shape {
                expected: self.input_dim,
                found: row.len(),
            });
        }
        buf.clear();
        buf.extend(self.mask.iter().map(|&j| row[j]));
        let mut z = self.intercept;
        for (j, &v) in buf.iter().enumerate() {
            let x = if self.scaler.std[j] > 0.0 {
                (v - self.scaler.mean[j]) / self.scaler.std[j]
            } else {
                0.0
            };
            z += self.weights[j] * x;
        }
        Ok(sigmoid(z))
    }
}

/// Mean binary cross-entropy of probabilities against {0,1} labels.
pub fn mean_bce(probs: &[f64], labels: &[u8]) -> f64 {
    let eps = 1e-12;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Mean-BCE gradient of a linear logistic scorer at (`weights`, `intercept`)
/// over a flat row-major matrix. Returns (d_weights, d_intercept).
pub fn bce_gradients(
    weights: &[f64],
    intercept: f64,
    x: &[f64],
    y: &[u8],
) -> (Vec<f64>, f64) {
    let d = weights.len();
    let n = y.len();
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = &x[i * d..(i + 1) * d];
        let mut z = intercept;
        for (w, &v) in weights.iter().zip(row) {
            z += w * v;
        }
        let err = sigmoid(z) - label as f64;
        for (g, &v) in gw.iter_mut().zip(row) {
            *g += err * v;
        }
        gb += err;
    }
    let inv = 1.0 / n as f64;
    for g in &mut gw {
        *g *= inv;
    }
    (gw, gb * inv)
}

/// Train logistic regression on (optionally masked) standardized features.
pub fn train_lr(
    train: &LabeledDataset,
    cfg: &SgdConfig,
    mask: Option<&Chromosome>,
) -> Result<LrModel> {
    train_lr_with(train, cfg, mask, true)
}

/// As [`train_lr`], with standardization optional (the stacking meta-learner
/// consumes raw base scores).
pub fn train_lr_with(
    train: &LabeledDataset,
    cfg: &SgdConfig,
    mask: Option<&Chromosome>,
    standardize: bool,
) -> Result<LrModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Training("training set is empty".into()));
    }
    if !train.has_both_classes() {
        return Err(Error::Training("training set contains a single class".into()));
    }
    let input_dim = train.n_features();
    let mask_idx = resolve_mask(input_dim, mask)?;
    let d = mask_idx.len();
    let n = train.len();

    let mut xm = mask_rows(&train.x, &mask_idx);
    let scaler = if standardize {
        let rows: Vec<Vec<f64>> = xm.chunks(d).map(<[f64]>::to_vec).collect();
        Standardizer::fit(&rows)
    } else {
        Standardizer::identity(d)
    };
    for row in xm.chunks_mut(d) {
        let copy: Vec<f64> = row.to_vec();
        scaler.transform_into(&copy, row);
    }

    let mut weights = vec![0.0; d];
    let mut intercept = 0.0;
    let mut vel_w = vec![0.0; d];
    let mut vel_b = [0.0];
    let mut order: Vec<usize> = (0..n).collect();
    let mut gw = vec![0.0; d];
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed_indexed(cfg.seed, "lr-epoch", epoch as u64));
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in batch {
                let row = &xm[i * d..(i + 1) * d];
                let mut z = intercept;
                for (w, &v) in weights.iter().zip(row) {
                    z += w * v;
                }
                let err = sigmoid(z) - train.y[i] as f64;
                for (g, &v) in gw.iter_mut().zip(row) {
                    *g += err * v;
                }
                gb += err;
            }
            let inv = 1.0 / batch.len() as f64;
            for g in &mut gw {
                *g *= inv;
            }
            gb *= inv;
            let lr = cfg.lr_at(step);
            sgd_nesterov_step(&mut weights, &gw, &mut vel_w, lr, cfg.momentum)?;
            sgd_nesterov_step(
                std::slice::from_mut(&mut intercept),
                &[gb],
                &mut vel_b,
                lr,
                cfg.momentum,
            )?;
            step += 1;
        }
    }
    if weights.iter().any(|w| !w.is_finite()) || !intercept.is_finite() {
        return Err(Error::Divergence("logistic regression training diverged".into()));
    }
    Ok(LrModel {
        weights,
        intercept,
        mask: mask_idx,
        input_dim,
        scaler,
        cfg: cfg.clone(),
    })
}

/// Score each full-width row with the trained model.
pub fn predict_lr(model: &LrModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut buf = Vec::with_capacity(model.mask.len());
    rows.iter().map(|row| model.score_one(row, &mut buf)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;
    use rand::Rng;

    fn separable_dataset(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = (i % 2) as u8;
            let center = if label == 1 { 2.0 } else { -2.0 };
            x.push(vec![
                center + rng.gen_range(-0.5..0.5),
                center + rng.gen_range(-0.5..0.5),
            ]);
            y.push(label);
        }
        crate::test_support::dataset_from_xy(x, y)
    }

    #[test]
    fn nesterov_step_hand_value() {
        let mut params = vec![0.0];
        let mut velocity = vec![0.0];
        sgd_nesterov_step(&mut params, &[1.0], &mut velocity, 0.1, 0.9).unwrap();
        assert!((velocity[0] - -0.1).abs() < 1e-15);
        assert!((params[0] - -0.19).abs() < 1e-15);
    }

    #[test]
    fn nesterov_zero_momentum_is_plain_sgd() {
        let mut params = vec![1.0, 2.0];
        let mut velocity = vec![0.0, 0.0];
        sgd_nesterov_step(&mut params, &[0.5, -1.0], &mut velocity, 0.2, 0.0).unwrap();
        assert_eq!(params, vec![1.0 - 0.2 * 0.5, 2.0 + 0.2]);
    }

    #[test]
    fn nesterov_fixed_point_when_grad_and_velocity_zero() {
        let mut params = vec![3.0];
        let mut velocity = vec![0.0];
        sgd_nesterov_step(&mut params, &[0.0], &mut velocity, 0.1, 0.9).unwrap();
        assert_eq!(params, vec![3.0]);
    }

    #[test]
    fn nesterov_rejects_non_finite_gradient() {
        let mut params = vec![0.0];
        let mut velocity = vec![0.0];
        let err = sgd_nesterov_step(&mut params, &[f64::NAN], &mut velocity, 0.1, 0.9).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    /// Gradient at zero weights for a single sample x=(1,0), y=1 is
    /// (sigma(0) - 1) * x = (-0.5, 0).
    #[test]
    fn bce_gradient_at_zero_weights() {
        let (gw, gb) = bce_gradients(&[0.0, 0.0], 0.0, &[1.0, 0.0], &[1]);
        assert_eq!(gw, vec![-0.5, 0.0]);
        assert_eq!(gb, -0.5);
    }

    /// Analytic gradient matches central finite differences (h = 1e-5)
    /// within 1e-5 relative error.
    #[test]
    fn bce_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let d = 4;
            let n = 24;
            let x: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: f64 = rng.gen_range(-1.0..1.0);
            let loss = |w: &[f64], b: f64| {
                let probs: Vec<f64> = (0..n)
                    .map(|i| {
                        let mut z = b;
                        for j in 0..d {
                            z += w[j] * x[i * d + j];
                        }
                        sigmoid(z)
                    })
                    .collect();
                mean_bce(&probs, &y)
            };
            let (gw, gb) = bce_gradients(&w, b, &x, &y);
            let h = 1e-5;
            for j in 0..d {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (loss(&wp, b) - loss(&wm, b)) / (2.0 * h);
                let rel = (gw[j] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-5, "weight {j}: analytic {} vs fd {fd}", gw[j]);
            }
            let fd = (loss(&w, b + h) - loss(&w, b - h)) / (2.0 * h);
            assert!((gb - fd).abs() / fd.abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn train_reaches_perfect_auc_on_separable_data() {
        let ds = separable_dataset(200, 5);
        let model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        let scores = predict_lr(&model, &ds.x).unwrap();
        assert_eq!(auc(&scores, &ds.y).unwrap(), 1.0);
        // training reduced the loss from its symmetric start
        assert!(mean_bce(&scores, &ds.y) < std::f64::consts::LN_2);
    }

    #[test]
    fn train_is_deterministic() {
        let ds = separable_dataset(120, 6);
        let a = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        let b = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.intercept(), b.intercept());
    }

    #[test]
    fn train_rejects_single_class() {
        let ds = crate::test_support::dataset_from_xy(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert!(matches!(
            train_lr(&ds, &SgdConfig::default(), None),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn predict_zero_model_scores_half() {
        let ds = separable_dataset(40, 8);
        let mut model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        model.weights.iter_mut().for_each(|w| *w = 0.0);
        model.intercept = 0.0;
        let scores = predict_lr(&model, &ds.x).unwrap();
        assert!(scores.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn predict_scores_strictly_inside_unit_interval() {
        let ds = separable_dataset(100, 9);
        let model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        let scores = predict_lr(&model, &ds.x).unwrap();
        assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn predict_matches_manual_sigma() {
        let ds = separable_dataset(60, 10);
        let model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        let scores = predict_lr(&model, &ds.x).unwrap();
        for (row, &score) in ds.x.iter().zip(&scores) {
            let mut z = model.intercept();
            for (j, &orig) in model.mask().iter().enumerate() {
                let v = (row[orig] - model.scaler.mean[j]) / model.scaler.std[j];
                z += model.weights()[j] * v;
            }
            assert!((score - sigmoid(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_dominates_when_large() {
        let ds = separable_dataset(40, 11);
        let mut model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        model.weights.iter_mut().for_each(|w| *w = 0.0);
        model.intercept = 10.0;
        let scores = predict_lr(&model, &ds.x).unwrap();
        assert!(scores.iter().all(|&s| s > 0.9999));
    }

    #[test]
    fn predict_rejects_wrong_width() {
        let ds = separable_dataset(40, 12);
        let model = train_lr(&ds, &SgdConfig::default(), None).unwrap();
        let err = predict_lr(&model, &[vec![1.0, 2.0, 3.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 2, found: 3 }));
    }

    #[test]
    fn mask_restricts_model_to_selected_features() {
        // feature 0 is pure noise, feature 1 separates
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let label = (i % 2) as f64;
                vec![rng.gen_range(-1.0..1.0), label * 2.0 - 1.0 + rng.gen_range(-0.3..0.3)]
            })
            .collect();
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = crate::test_support::dataset_from_xy(x, y);
        let noise_only = Chromosome::new(vec![true, false]).unwrap();
        let model = train_lr(&ds, &SgdConfig::default(), Some(&noise_only)).unwrap();
        let scores = predict_lr(&model, &ds.x).unwrap();
        let a = auc(&scores, &ds.y).unwrap();
        assert!(a < 0.65, "noise-only mask should not separate, got AUC {a}");
        assert_eq!(model.mask(), &[0]);
    }
}
