//! Class-aware discriminator: a K-way classifier head and a real/fake head,
//! each a single fully-connected layer over a `d`-dimensional feature.
//! Losses consume the logits; probabilities are for reporting and prediction.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softmax, Tape, Tensor, Var};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    /// `K x d`
    pub w_cls: Tensor,
    /// `K`
    pub b_cls: Tensor,
    /// `d`
    pub w_adv: Tensor,
    /// one element
    pub b_adv: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct DiscriminatorVars {
    pub w_cls: Var,
    pub b_cls: Var,
    pub w_adv: Var,
    pub b_adv: Var,
}

impl DiscriminatorVars {
    pub fn all(&self) -> [Var; 4] {
        [self.w_cls, self.b_cls, self.w_adv, self.b_adv]
    }
}

impl DiscriminatorParams {
    pub fn init(d: usize, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        DiscriminatorParams {
            w_cls: rng::glorot(rng, classes, d),
            b_cls: Tensor::zeros(&[classes]),
            w_adv: rng::glorot(rng, 1, d).reshape(vec![d]).expect("shape"),
            b_adv: Tensor::zeros(&[1]),
        }
    }

    pub fn zeros(d: usize, classes: usize) -> Self {
        DiscriminatorParams {
            w_cls: Tensor::zeros(&[classes, d]),
            b_cls: Tensor::zeros(&[classes]),
            w_adv: Tensor::zeros(&[d]),
            b_adv: Tensor::zeros(&[1]),
        }
    }

    pub fn classes(&self) -> usize {
        self.w_cls.rows()
    }

    pub fn dim(&self) -> usize {
        self.w_cls.cols()
    }

    pub fn register(&self, tape: &mut Tape, trainable: bool) -> DiscriminatorVars {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        DiscriminatorVars {
            w_cls: leaf(&self.w_cls),
            b_cls: leaf(&self.b_cls),
            w_adv: leaf(&self.w_adv),
            b_adv: leaf(&self.b_adv),
        }
    }

    /// Trainable tensors in the fixed order w_cls, b_cls, w_adv, b_adv.
    pub fn trainable_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w_cls, &mut self.b_cls, &mut self.w_adv, &mut self.b_adv]
    }

    pub fn trainable(&self) -> [&Tensor; 4] {
        [&self.w_cls, &self.b_cls, &self.w_adv, &self.b_adv]
    }

    fn check_dim(&self, op: &'static str, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::dim(op, format!("feature of length {}", self.dim()), len));
        }
        Ok(())
    }
}

/// `B x K` class logits of a `B x d` batch.
pub fn class_logits_on_tape(tape: &mut Tape, vars: &DiscriminatorVars, feats: Var) -> Result<Var> {
    tape.affine(vars.w_cls, vars.b_cls, feats)
}

/// `B x 1` real/fake logits of a `B x d` batch.
pub fn adversarial_logits_on_tape(tape: &mut Tape, vars: &DiscriminatorVars, feats: Var) -> Result<Var> {
    let d = tape.value(vars.w_adv).len();
    let w = tape.reshape(vars.w_adv, vec![1, d])?;
    tape.affine(w, vars.b_adv, feats)
}

/// Class logits and probabilities of one feature.
pub fn classify(v: &[f64], params: &DiscriminatorParams) -> Result<(Vec<f64>, Vec<f64>)> {
    params.check_dim("classify", v.len())?;
    let logits: Vec<f64> = (0..params.classes())
        .map(|k| params.w_cls.row(k).iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + params.b_cls.data()[k])
        .collect();
    let probs = softmax(&logits)?;
    Ok((logits, probs))
}

/// Real/fake logit of one feature and the probability of it being real.
pub fn adversarial_score(v: &[f64], params: &DiscriminatorParams) -> Result<(f64, f64)> {
    params.check_dim("adversarial_score", v.len())?;
    let logit = params.w_adv.data().iter().zip(v).map(|(w, x)| w * x).sum::<f64>() + params.b_adv.item();
    Ok((logit, sigmoid(logit)))
}
