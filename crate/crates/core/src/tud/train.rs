use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::TudModel;
use super::Sequence;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "invalid learning rate {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch (measured during the pass, with dropout).
    pub epoch_loss: Vec<f64>,
}

/// A model whose BCE gradient can be accumulated per example.
pub trait Trainable {
    type Input;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Add the gradient of the loss for one example into `grad`, return the loss.
    fn accumulate(
        &self,
        x: &Self::Input,
        label: f64,
        rng: Option<&mut ChaCha8Rng>,
        grad: &mut [f64],
    ) -> Result<f64>;
}

impl Trainable for TudModel {
    type Input = Sequence;

    fn params(&self) -> &[f64] {
        TudModel::params(self)
    }

    fn params_mut(&mut self) -> &mut [f64] {
        TudModel::params_mut(self)
    }

    fn accumulate(
        &self,
        x: &Sequence,
        label: f64,
        rng: Option<&mut ChaCha8Rng>,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.accumulate_gradient(x, label, rng, grad)
    }
}

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Mini-batch training with a seeded shuffle per epoch. Gradients are
/// averaged over each batch; dropout draws come from the same stream.
pub fn fit<M: Trainable>(
    model: &mut M,
    data: &[(&M::Input, bool)],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("no training examples".into()));
    }
    let n = model.params().len();
    let mut adam = Adam::new(n, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; n];
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (x, y) = data[i];
                let loss = model
                    .accumulate(x, f64::from(u8::from(y)), Some(&mut rng), &mut grad)
                    .map_err(|e| with_context(e, epoch, b))?;
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "epoch {epoch}, batch {b}: loss is {loss}"
                    )));
                }
                total += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad);
            if let Some(k) = model.params().iter().position(|p| !p.is_finite()) {
                return Err(Error::Numerical(format!(
                    "epoch {epoch}, batch {b}: parameter {k} diverged"
                )));
            }
        }
        report.epoch_loss.push(total / data.len() as f64);
    }
    Ok(report)
}

fn with_context(e: Error, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("epoch {epoch}, batch {batch}: {msg}")),
        other => other,
    }
}

/// Decision rule: depressed iff the probability exceeds one half.
pub fn predict_label(probability: f64) -> bool {
    probability > 0.5
}
