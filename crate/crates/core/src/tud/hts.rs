use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{bce_from_logit, sigmoid};
use super::train::Trainable;
use crate::semantics::Embedding;
use crate::{Error, Result};

/// Logistic regression over the whole-history embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct HtsModel {
    /// Weights followed by the bias.
    params: Vec<f64>,
}

impl HtsModel {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(HtsModel {
            params: (0..=dim).map(|_| rng.random_range(-bound..bound)).collect(),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        HtsModel {
            params: vec![0.0; dim + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn logit(&self, x: &Embedding) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::Validation(format!(
                "embedding dimension {} != {}",
                x.dim(),
                self.dim()
            )));
        }
        let (w, b) = self.params.split_at(self.dim());
        let z = w
            .iter()
            .zip(x.as_slice())
            .map(|(w, &v)| w * v as f64)
            .sum::<f64>()
            + b[0];
        if !z.is_finite() {
            return Err(Error::Numerical(format!("non-finite logit {z}")));
        }
        Ok(z)
    }

    pub fn probability(&self, atea: &Embedding) -> Result<f64> {
        self.logit(atea).map(sigmoid)
    }
}

impl Trainable for HtsModel {
    type Input = Embedding;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn accumulate(
        &self,
        x: &Embedding,
        label: f64,
        _rng: Option<&mut ChaCha8Rng>,
        grad: &mut [f64],
    ) -> Result<f64> {
        let z = self.logit(x)?;
        let d = sigmoid(z) - label;
        let (gw, gb) = grad.split_at_mut(self.dim());
        for (g, &v) in gw.iter_mut().zip(x.as_slice()) {
            *g += d * v as f64;
        }
        gb[0] += d;
        Ok(bce_from_logit(z, label))
    }
}
