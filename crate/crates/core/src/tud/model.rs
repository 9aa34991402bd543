//! BiLSTM encoder, additive attention pooling and a sigmoid head.
//!
//! All parameters live in one flat `Vec<f64>` split into named blocks, so
//! optimizers, gradient checks and checkpoints can treat the model as a
//! plain vector. LSTM gate rows are ordered input, forget, cell, output.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{axpy, bce_from_logit, dot, matvec_add, matvec_t_add, outer_add, sigmoid};
use super::Sequence;
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 100;
pub const DEFAULT_DROPOUT: f64 = 0.1;

pub const BLOCK_NAMES: [&str; 12] = [
    "fwd.w_ih",
    "fwd.w_hh",
    "fwd.bias",
    "bwd.w_ih",
    "bwd.w_hh",
    "bwd.bias",
    "attn.w_enc",
    "attn.w_final",
    "attn.bias",
    "attn.v",
    "head.w",
    "head.b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub hidden: usize,
}

impl Dims {
    /// Width of one encoder state (both directions).
    pub fn state(&self) -> usize {
        2 * self.hidden
    }

    pub fn attention(&self) -> usize {
        2 * self.hidden
    }

    /// `(rows, cols, fan_in)` per block, in [`BLOCK_NAMES`] order.
    pub fn block_shapes(&self) -> [(usize, usize, usize); 12] {
        let (i, h, s, a) = (self.input, self.hidden, self.state(), self.attention());
        let lstm_fan = i + h;
        [
            (4 * h, i, lstm_fan),
            (4 * h, h, lstm_fan),
            (4 * h, 1, lstm_fan),
            (4 * h, i, lstm_fan),
            (4 * h, h, lstm_fan),
            (4 * h, 1, lstm_fan),
            (a, s, s),
            (a, s, s),
            (a, 1, s),
            (a, 1, a),
            (s, 1, s),
            (1, 1, s),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.block_shapes().iter().map(|(r, c, _)| r * c).sum()
    }

    fn ranges(&self) -> [Range<usize>; 12] {
        let mut start = 0;
        self.block_shapes().map(|(r, c, _)| {
            let range = start..start + r * c;
            start += r * c;
            range
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    /// Inverted dropout rate on the episode input vectors (training only).
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: DEFAULT_HIDDEN,
            dropout: DEFAULT_DROPOUT,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Output of an inference pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub probability: f64,
    pub logit: f64,
    pub attention: Vec<f64>,
    /// Attention-pooled context vector.
    pub context: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TudModel {
    dims: Dims,
    config: ModelConfig,
    params: Vec<f64>,
}

struct DirCache {
    /// Post-activation gates per step, `4H` each.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

struct Cache {
    len: usize,
    x: Vec<f64>,
    fwd: DirCache,
    bwd: DirCache,
    /// Concatenated states `[h_fwd ; h_bwd]` per step.
    states: Vec<f64>,
    final_state: Vec<f64>,
    /// `tanh` of the attention pre-activations per step.
    u: Vec<f64>,
    alpha: Vec<f64>,
    context: Vec<f64>,
    logit: f64,
}

impl TudModel {
    pub fn new(input_dim: usize, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let dims = Dims {
            input: input_dim,
            hidden: config.hidden,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Vec::with_capacity(dims.param_count());
        for (rows, cols, fan_in) in dims.block_shapes() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..rows * cols).map(|_| rng.random_range(-bound..bound)));
        }
        Ok(TudModel {
            dims,
            config: *config,
            params,
        })
    }

    /// Rebuild from raw parameters, e.g. a checkpoint.
    pub fn from_params(dims: Dims, config: ModelConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if dims.hidden != config.hidden {
            return Err(Error::Config(
                "hidden size disagrees with model config".into(),
            ));
        }
        if params.len() != dims.param_count() {
            return Err(Error::Validation(format!(
                "expected {} parameters, found {}",
                dims.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite model parameter".into()));
        }
        Ok(TudModel {
            dims,
            config,
            params,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Named parameter blocks in layout order.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        BLOCK_NAMES
            .iter()
            .zip(self.dims.ranges())
            .map(|(n, r)| (*n, &self.params[r]))
            .collect()
    }

    pub fn block_ranges(&self) -> Vec<(&'static str, Range<usize>)> {
        BLOCK_NAMES
            .iter()
            .copied()
            .zip(self.dims.ranges())
            .collect()
    }

    fn block(&self, i: usize) -> &[f64] {
        let r = self.dims.ranges()[i].clone();
        &self.params[r]
    }

    /// Inference pass (no dropout).
    pub fn forward(&self, seq: &Sequence) -> Result<Forward> {
        let x = self.inputs(seq, None)?;
        let cache = self.run(x, seq.len());
        self.check(&cache)?;
        Ok(Forward {
            probability: sigmoid(cache.logit),
            logit: cache.logit,
            attention: cache.alpha,
            context: cache.context,
        })
    }

    pub fn probability(&self, seq: &Sequence) -> Result<f64> {
        self.forward(seq).map(|f| f.probability)
    }

    /// BCE loss for one labelled sequence without dropout.
    pub fn loss(&self, seq: &Sequence, label: f64) -> Result<f64> {
        self.forward(seq).map(|f| bce_from_logit(f.logit, label))
    }

    /// Add the BCE gradient for one sequence into `grad` and return the loss.
    /// Dropout is applied when an RNG is supplied.
    pub fn accumulate_gradient(
        &self,
        seq: &Sequence,
        label: f64,
        dropout_rng: Option<&mut ChaCha8Rng>,
        grad: &mut [f64],
    ) -> Result<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        let x = self.inputs(seq, dropout_rng)?;
        let cache = self.run(x, seq.len());
        self.check(&cache)?;
        self.backward(&cache, label, grad);
        Ok(bce_from_logit(cache.logit, label))
    }

    fn inputs(&self, seq: &Sequence, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Vec<f64>> {
        if seq.dim() != self.dims.input {
            return Err(Error::Validation(format!(
                "episode vectors have dimension {}, model expects {}",
                seq.dim(),
                self.dims.input
            )));
        }
        if seq.is_empty() {
            return Err(Error::Validation("empty episode sequence".into()));
        }
        let mut x: Vec<f64> = seq.values().iter().map(|&v| v as f64).collect();
        if let Some(rng) = dropout_rng {
            let p = self.config.dropout;
            if p > 0.0 {
                let keep = 1.0 / (1.0 - p);
                for v in &mut x {
                    *v = if rng.random_bool(p) { 0.0 } else { *v * keep };
                }
            }
        }
        Ok(x)
    }

    fn check(&self, cache: &Cache) -> Result<()> {
        if cache.logit.is_finite() {
            return Ok(());
        }
        let max_abs = cache.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Err(Error::Numerical(format!(
            "non-finite logit {} (sequence length {}, max |x| {max_abs:e}, finite states {})",
            cache.logit,
            cache.len,
            cache.states.iter().all(|v| v.is_finite())
        )))
    }

    fn run_direction(&self, base: usize, x: &[f64], len: usize, reverse: bool) -> DirCache {
        let (i_dim, h) = (self.dims.input, self.dims.hidden);
        let (w_ih, w_hh, bias) = (self.block(base), self.block(base + 1), self.block(base + 2));
        let mut cache = DirCache {
            gates: vec![0.0; len * 4 * h],
            c: vec![0.0; len * h],
            tanh_c: vec![0.0; len * h],
            h: vec![0.0; len * h],
        };
        let mut z = vec![0.0; 4 * h];
        for step in 0..len {
            let t = if reverse { len - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            z.copy_from_slice(bias);
            matvec_add(w_ih, i_dim, &x[t * i_dim..(t + 1) * i_dim], &mut z);
            if let Some(p) = prev {
                matvec_add(w_hh, h, &cache.h[p * h..(p + 1) * h], &mut z);
            }
            let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..h {
                gates[k] = sigmoid(z[k]);
                gates[h + k] = sigmoid(z[h + k]);
                gates[2 * h + k] = z[2 * h + k].tanh();
                gates[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c_prev = prev.map_or(0.0, |p| cache.c[p * h + k]);
                let c = gates[h + k] * c_prev + gates[k] * gates[2 * h + k];
                let tc = c.tanh();
                cache.c[t * h + k] = c;
                cache.tanh_c[t * h + k] = tc;
                cache.h[t * h + k] = gates[3 * h + k] * tc;
            }
        }
        cache
    }

    fn run(&self, x: Vec<f64>, len: usize) -> Cache {
        let (h, s) = (self.dims.hidden, self.dims.state());
        let fwd = self.run_direction(0, &x, len, false);
        let bwd = self.run_direction(3, &x, len, true);
        let mut states = vec![0.0; len * s];
        for t in 0..len {
            states[t * s..t * s + h].copy_from_slice(&fwd.h[t * h..(t + 1) * h]);
            states[t * s + h..(t + 1) * s].copy_from_slice(&bwd.h[t * h..(t + 1) * h]);
        }
        let mut final_state = vec![0.0; s];
        final_state[..h].copy_from_slice(&fwd.h[(len - 1) * h..len * h]);
        final_state[h..].copy_from_slice(&bwd.h[..h]);

        let (u, alpha, context) = self.attend(&states, &final_state, len);
        let logit = dot(self.block(10), &context) + self.block(11)[0];
        Cache {
            len,
            x,
            fwd,
            bwd,
            states,
            final_state,
            u,
            alpha,
            context,
            logit,
        }
    }

    fn attend(
        &self,
        states: &[f64],
        final_state: &[f64],
        len: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (s, a) = (self.dims.state(), self.dims.attention());
        let (w_enc, w_final, bias, v) =
            (self.block(6), self.block(7), self.block(8), self.block(9));
        let mut query = bias.to_vec();
        matvec_add(w_final, s, final_state, &mut query);
        let mut u = vec![0.0; len * a];
        let mut scores = vec![0.0; len];
        for t in 0..len {
            let ut = &mut u[t * a..(t + 1) * a];
            ut.copy_from_slice(&query);
            matvec_add(w_enc, s, &states[t * s..(t + 1) * s], ut);
            for e in ut.iter_mut() {
                *e = e.tanh();
            }
            scores[t] = dot(v, ut);
        }
        let alpha = softmax(&scores);
        let mut context = vec![0.0; s];
        for t in 0..len {
            axpy(&mut context, alpha[t], &states[t * s..(t + 1) * s]);
        }
        (u, alpha, context)
    }

    /// Attention weights and context for explicit encoder states
    /// (`len × 2H`, row-major) and a final state of width `2H`.
    pub fn attention_over(
        &self,
        states: &[f64],
        final_state: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.dims.state();
        if states.is_empty() || !states.len().is_multiple_of(s) || final_state.len() != s {
            return Err(Error::Validation(format!(
                "attention expects rows of width {s}"
            )));
        }
        let (_, alpha, context) = self.attend(states, final_state, states.len() / s);
        Ok((alpha, context))
    }

    fn backward(&self, cache: &Cache, label: f64, grad: &mut [f64]) {
        let (h, s, a, len) = (
            self.dims.hidden,
            self.dims.state(),
            self.dims.attention(),
            cache.len,
        );
        let [g_fw_ih, g_fw_hh, g_fw_b, g_bw_ih, g_bw_hh, g_bw_b, g_enc, g_final, g_attn_b, g_v, g_head_w, g_head_b] =
            split_blocks(&self.dims, grad);

        let dlogit = sigmoid(cache.logit) - label;
        let head_w = self.block(10);
        axpy(g_head_w, dlogit, &cache.context);
        g_head_b[0] += dlogit;
        let d_context: Vec<f64> = head_w.iter().map(|w| w * dlogit).collect();

        let mut d_states = vec![0.0; len * s];
        let mut d_scores = vec![0.0; len];
        for t in 0..len {
            let st = &cache.states[t * s..(t + 1) * s];
            d_scores[t] = dot(&d_context, st);
            axpy(
                &mut d_states[t * s..(t + 1) * s],
                cache.alpha[t],
                &d_context,
            );
        }
        let mean: f64 = cache
            .alpha
            .iter()
            .zip(&d_scores)
            .map(|(al, d)| al * d)
            .sum();
        let (w_enc, w_final, v) = (self.block(6), self.block(7), self.block(9));
        let mut d_query = vec![0.0; a];
        let mut d_pre = vec![0.0; a];
        for t in 0..len {
            let dw = cache.alpha[t] * (d_scores[t] - mean);
            let ut = &cache.u[t * a..(t + 1) * a];
            axpy(g_v, dw, ut);
            for k in 0..a {
                d_pre[k] = dw * v[k] * (1.0 - ut[k] * ut[k]);
            }
            outer_add(g_enc, &d_pre, &cache.states[t * s..(t + 1) * s]);
            matvec_t_add(w_enc, s, &d_pre, &mut d_states[t * s..(t + 1) * s]);
            for k in 0..a {
                d_query[k] += d_pre[k];
            }
        }
        for k in 0..a {
            g_attn_b[k] += d_query[k];
        }
        outer_add(g_final, &d_query, &cache.final_state);
        let mut d_final = vec![0.0; s];
        matvec_t_add(w_final, s, &d_query, &mut d_final);

        let mut ext_fwd = vec![0.0; len * h];
        let mut ext_bwd = vec![0.0; len * h];
        for t in 0..len {
            ext_fwd[t * h..(t + 1) * h].copy_from_slice(&d_states[t * s..t * s + h]);
            ext_bwd[t * h..(t + 1) * h].copy_from_slice(&d_states[t * s + h..(t + 1) * s]);
        }
        for k in 0..h {
            ext_fwd[(len - 1) * h + k] += d_final[k];
            ext_bwd[k] += d_final[h + k];
        }
        self.backward_direction(
            0, &cache.fwd, &cache.x, len, false, &ext_fwd, g_fw_ih, g_fw_hh, g_fw_b,
        );
        self.backward_direction(
            3, &cache.bwd, &cache.x, len, true, &ext_bwd, g_bw_ih, g_bw_hh, g_bw_b,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_direction(
        &self,
        base: usize,
        cache: &DirCache,
        x: &[f64],
        len: usize,
        reverse: bool,
        ext: &[f64],
        g_ih: &mut [f64],
        g_hh: &mut [f64],
        g_b: &mut [f64],
    ) {
        let (i_dim, h) = (self.dims.input, self.dims.hidden);
        let w_hh = self.block(base + 1);
        let mut dh_carry = vec![0.0; h];
        let mut dc_carry = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for step in (0..len).rev() {
            let t = if reverse { len - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..h {
                let (ig, fg, gg, og) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                let tc = cache.tanh_c[t * h + k];
                let dh = ext[t * h + k] + dh_carry[k];
                let dc = dh * og * (1.0 - tc * tc) + dc_carry[k];
                let c_prev = prev.map_or(0.0, |p| cache.c[p * h + k]);
                dz[k] = dc * gg * ig * (1.0 - ig);
                dz[h + k] = dc * c_prev * fg * (1.0 - fg);
                dz[2 * h + k] = dc * ig * (1.0 - gg * gg);
                dz[3 * h + k] = dh * tc * og * (1.0 - og);
                dc_carry[k] = dc * fg;
            }
            outer_add(g_ih, &dz, &x[t * i_dim..(t + 1) * i_dim]);
            for (gb, d) in g_b.iter_mut().zip(&dz) {
                *gb += d;
            }
            dh_carry.iter_mut().for_each(|v| *v = 0.0);
            if let Some(p) = prev {
                outer_add(g_hh, &dz, &cache.h[p * h..(p + 1) * h]);
                matvec_t_add(w_hh, h, &dz, &mut dh_carry);
            }
        }
    }
}

fn split_blocks<'a>(dims: &Dims, buf: &'a mut [f64]) -> [&'a mut [f64]; 12] {
    let mut rest = buf;
    let mut out: Vec<&'a mut [f64]> = Vec::with_capacity(12);
    for r in dims.ranges() {
        let (head, tail) = std::mem::take(&mut rest).split_at_mut(r.len());
        out.push(head);
        rest = tail;
    }
    out.try_into().unwrap_or_else(|_| unreachable!())
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
