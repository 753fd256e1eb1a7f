//! Query encoder: two fully-connected layers with batch normalization and a
//! leaky rectifier on the hidden layer,
//! `q = W2 * lrelu(gamma * BN(W1 x) + beta) + b2`.
//!
//! The first layer has no bias of its own: batch normalization subtracts the
//! batch mean, which cancels any bias exactly, and `beta` plays that role.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::rng;

pub const BN_EPS: f64 = 1e-5;
/// Weight kept on the old running statistics at every train-mode forward.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub w1: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// Tape handles for the trainable encoder tensors.
#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub w1: Var,
    pub gamma: Var,
    pub beta: Var,
    pub w2: Var,
    pub b2: Var,
}

/// Batch mean and biased variance of the hidden pre-activations.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub batch: usize,
}

impl EncoderParams {
    pub fn init(d: usize, hidden: usize, h: usize, rng: &mut ChaCha8Rng) -> Self {
        EncoderParams {
            w1: rng::glorot(rng, hidden, d),
            gamma: Tensor::full(&[hidden], 1.0),
            beta: Tensor::zeros(&[hidden]),
            running_mean: Tensor::zeros(&[hidden]),
            running_var: Tensor::full(&[hidden], 1.0),
            w2: rng::glorot(rng, h, hidden),
            b2: Tensor::zeros(&[h]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn query_dim(&self) -> usize {
        self.w2.rows()
    }

    /// Registers the trainable tensors, as parameters or as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> EncoderVars {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        EncoderVars {
            w1: leaf(&self.w1),
            gamma: leaf(&self.gamma),
            beta: leaf(&self.beta),
            w2: leaf(&self.w2),
            b2: leaf(&self.b2),
        }
    }

    /// Folds one batch's statistics into the running estimates. The running
    /// variance tracks the unbiased batch variance.
    pub fn update_running(&mut self, stats: &BatchStats) {
        let n = stats.batch as f64;
        let correction = if stats.batch > 1 { n / (n - 1.0) } else { 1.0 };
        for (r, m) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
        }
        for (r, v) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v * correction;
        }
    }

    /// Trainable tensors in the fixed order w1, gamma, beta, w2, b2.
    pub fn trainable_mut(&mut self) -> [&mut Tensor; 5] {
        [
            &mut self.w1,
            &mut self.gamma,
            &mut self.beta,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub fn trainable(&self) -> [&Tensor; 5] {
        [&self.w1, &self.gamma, &self.beta, &self.w2, &self.b2]
    }
}

impl EncoderVars {
    pub fn all(&self) -> [Var; 5] {
        [self.w1, self.gamma, self.beta, self.w2, self.b2]
    }
}

/// Encodes a `B x d` batch on `tape`. Train mode normalizes with batch
/// statistics and returns them; eval mode uses the running statistics.
pub fn encode_on_tape(
    tape: &mut Tape,
    params: &EncoderParams,
    vars: &EncoderVars,
    x: Var,
    mode: Mode,
) -> Result<(Var, Option<BatchStats>)> {
    let xv = tape.value(x);
    if xv.rank() != 2 || xv.cols() != params.input_dim() {
        return Err(Error::dim(
            "encode_query",
            format!("B x {}", params.input_dim()),
            format!("{:?}", xv.shape()),
        ));
    }
    let batch = xv.rows();
    if batch == 0 {
        return Err(Error::dim("encode_query", "non-empty batch", 0));
    }
    let pre = tape.matmul_t(x, false, vars.w1, true)?;
    let (normed, stats) = match mode {
        Mode::Train => {
            if batch < 2 {
                return Err(Error::Config("train-mode encoding needs a batch of at least 2".into()));
            }
            let (n, mean, var) = tape.batch_norm(pre, BN_EPS)?;
            (n, Some(BatchStats { mean, var, batch }))
        }
        Mode::Eval => {
            let neg_mean = tape.constant(params.running_mean.map(|m| -m));
            let inv_std = tape.constant(params.running_var.map(|v| 1.0 / (v + BN_EPS).sqrt()));
            let centered = tape.add_row(pre, neg_mean)?;
            (tape.mul_row(centered, inv_std)?, None)
        }
    };
    let scaled = tape.mul_row(normed, vars.gamma)?;
    let shifted = tape.add_row(scaled, vars.beta)?;
    let hidden = tape.leaky_relu(shifted);
    let q = tape.affine(vars.w2, vars.b2, hidden)?;
    Ok((q, stats))
}

/// Encodes a `B x d` batch into `B x h` queries. Train mode updates the
/// running statistics in `params`.
pub fn encode_query(x: &Tensor, params: &mut EncoderParams, mode: Mode) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = params.register(&mut tape, false);
    let xv = tape.constant(x.clone());
    let (q, stats) = encode_on_tape(&mut tape, params, &vars, xv, mode)?;
    if let Some(stats) = stats {
        params.update_running(&stats);
    }
    Ok(tape.value(q).clone())
}
