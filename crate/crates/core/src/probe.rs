//! Linear softmax probe retrained on frozen features.
//!
//! Defaults follow the component-evaluation protocol: 50 epochs, mini-batches
//! of 128, Adam at learning rate 0.01, Gaussian weight init (std 0.01), zero
//! bias, mean cross-entropy loss and no weight decay.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::FeatureMatrix;
use crate::spectral::{component_of, Component};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub init_std: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            init_std: 0.01,
            seed: 0,
            shuffle: true,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::invalid("init_std must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam decay rates must be in [0, 1)"));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// `logits = x W + b`, with `W` of shape `d x C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl ProbeModel {
    pub fn zeros(d: usize, classes: usize) -> Self {
        Self {
            weights: DMatrix::zeros(d, classes),
            bias: DVector::zeros(classes),
        }
    }

    pub fn d(&self) -> usize {
        self.weights.nrows()
    }

    pub fn classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x * &self.weights;
        for mut row in z.row_iter_mut() {
            row += self.bias.transpose();
        }
        z
    }

    /// Argmax per row; ties go to the lowest class index.
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<u32> {
        let z = self.logits(x);
        z.row_iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = logits.clone();
    for mut row in p.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    p
}

#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    pub grad_w: DMatrix<f64>,
    pub grad_b: DVector<f64>,
}

/// Mean cross-entropy of `softmax(x W + b)` and its exact gradient.
pub fn loss_and_grad(model: &ProbeModel, x: &DMatrix<f64>, labels: &[u32]) -> Result<Gradient> {
    let b = x.nrows();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if labels.len() != b {
        return Err(Error::invalid("batch rows and labels disagree"));
    }
    if x.ncols() != model.d() {
        return Err(Error::invalid(format!(
            "batch has {} columns, model expects {}",
            x.ncols(),
            model.d()
        )));
    }
    let classes = model.classes();
    if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::invalid(format!("label {l} out of range for {classes} classes")));
    }

    let z = model.logits(x);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite logits".into()));
    }
    let mut loss = 0.0;
    let mut g = DMatrix::zeros(b, classes);
    for (i, row) in z.row_iter().enumerate() {
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let y = labels[i] as usize;
        loss += lse - row[y];
        for c in 0..classes {
            g[(i, c)] = (row[c] - lse).exp();
        }
        g[(i, y)] -= 1.0;
    }
    let inv_b = 1.0 / b as f64;
    g *= inv_b;
    let grad_w = x.transpose() * &g;
    let grad_b = g.row_sum().transpose();
    Ok(Gradient {
        loss: loss * inv_b,
        grad_w,
        grad_b,
    })
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m_w: DMatrix<f64>,
    v_w: DMatrix<f64>,
    m_b: DVector<f64>,
    v_b: DVector<f64>,
}

impl Adam {
    pub fn new(cfg: &ProbeConfig, d: usize, classes: usize) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            t: 0,
            m_w: DMatrix::zeros(d, classes),
            v_w: DMatrix::zeros(d, classes),
            m_b: DVector::zeros(classes),
            v_b: DVector::zeros(classes),
        }
    }

    pub fn step(&mut self, model: &mut ProbeModel, grad: &Gradient) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let update = |theta: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for i in 0..model.weights.len() {
            update(
                &mut model.weights.as_mut_slice()[i],
                &mut self.m_w.as_mut_slice()[i],
                &mut self.v_w.as_mut_slice()[i],
                grad.grad_w.as_slice()[i],
            );
        }
        for i in 0..model.bias.len() {
            update(
                &mut model.bias[i],
                &mut self.m_b[i],
                &mut self.v_b[i],
                grad.grad_b[i],
            );
        }
    }
}

/// Applied to every mini-batch before the forward pass.
pub trait BatchTransform {
    fn apply(&self, x: DMatrix<f64>) -> Result<DMatrix<f64>>;
}

pub struct Identity;

impl BatchTransform for Identity {
    fn apply(&self, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(x)
    }
}

/// Decomposes each mini-batch on its own and keeps one component.
pub struct PerBatchComponent {
    pub component: Component,
    pub threshold: f64,
}

impl BatchTransform for PerBatchComponent {
    fn apply(&self, x: DMatrix<f64>) -> Result<DMatrix<f64>> {
        component_of(&x, self.component, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub model: ProbeModel,
    pub train_loss_history: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn gather_rows(data: &FeatureMatrix, rows: &[usize]) -> (DMatrix<f64>, Vec<u32>) {
    let d = data.d();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| data.row(rows[i])[j] as f64);
    let labels = rows.iter().map(|&r| data.labels()[r]).collect();
    (x, labels)
}

fn check_compatible(model_d: usize, classes: usize, data: &FeatureMatrix) -> Result<()> {
    if data.d() != model_d {
        return Err(Error::invalid(format!(
            "features have d = {}, expected {model_d}",
            data.d()
        )));
    }
    if data.num_classes() as usize != classes {
        return Err(Error::invalid(format!(
            "features have {} classes, expected {classes}",
            data.num_classes()
        )));
    }
    Ok(())
}

pub fn train_probe(
    train: &FeatureMatrix,
    test: Option<&FeatureMatrix>,
    cfg: &ProbeConfig,
) -> Result<ProbeResult> {
    train_probe_with(train, test, cfg, &Identity)
}

/// Like [`train_probe`], but passes every mini-batch (and every evaluation
/// chunk of `batch_size` consecutive rows) through `transform` first.
pub fn train_probe_with(
    train: &FeatureMatrix,
    test: Option<&FeatureMatrix>,
    cfg: &ProbeConfig,
    transform: &dyn BatchTransform,
) -> Result<ProbeResult> {
    cfg.validate()?;
    let (d, classes) = (train.d(), train.num_classes() as usize);
    if let Some(t) = test {
        check_compatible(d, classes, t)?;
    }

    let mut model = ProbeModel::zeros(d, classes);
    if cfg.init_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0);
        let normal = Normal::new(0.0, cfg.init_std).expect("validated std");
        // fill row-major for a layout-independent draw order
        for i in 0..d {
            for c in 0..classes {
                model.weights[(i, c)] = normal.sample(&mut rng);
            }
        }
    }
    let mut adam = Adam::new(cfg, d, classes);

    let n = train.n();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(epoch as u64 + 1);
            order.sort_unstable();
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (batch_idx, rows) in order.chunks(cfg.batch_size).enumerate() {
            let (x, labels) = gather_rows(train, rows);
            let x = transform.apply(x)?;
            let grad = loss_and_grad(&model, &x, &labels).map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::Numerical(format!("epoch {epoch}, batch {batch_idx}: {msg}"))
                }
                other => other,
            })?;
            if !grad.loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            epoch_loss += grad.loss * rows.len() as f64;
            adam.step(&mut model, &grad);
        }
        history.push(epoch_loss / n as f64);
    }

    let train_accuracy = evaluate_with(&model, train, cfg.batch_size, transform)?;
    let test_accuracy = match test {
        Some(t) => Some(evaluate_with(&model, t, cfg.batch_size, transform)?),
        None => None,
    };
    Ok(ProbeResult {
        model,
        train_loss_history: history,
        train_accuracy,
        test_accuracy,
    })
}

/// Fraction of rows whose argmax prediction equals the label.
pub fn evaluate(model: &ProbeModel, data: &FeatureMatrix) -> Result<f64> {
    evaluate_with(model, data, 4096, &Identity)
}

fn evaluate_with(
    model: &ProbeModel,
    data: &FeatureMatrix,
    chunk: usize,
    transform: &dyn BatchTransform,
) -> Result<f64> {
    check_compatible(model.d(), model.classes(), data)?;
    let rows: Vec<usize> = (0..data.n()).collect();
    let mut correct = 0usize;
    for part in rows.chunks(chunk.max(1)) {
        let (x, labels) = gather_rows(data, part);
        let x = transform.apply(x)?;
        correct += model
            .predict(&x)
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count();
    }
    Ok(correct as f64 / data.n() as f64)
}
