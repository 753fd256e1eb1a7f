//! Reference classifiers for the synthetic benchmark: a single linear
//! softmax layer, the same capacity as the discriminator's class head,
//! trained directly on either partial or full features.

use rand::seq::index::sample;

use crate::data::FeatureTriplet;
use crate::error::{Error, Result};
use crate::evalfuse::Predictor;
use crate::numerics::{Tape, Tensor};
use crate::optim::Adam;
use crate::rng::{self, purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSource {
    /// Train on `x`, the partial feature.
    Partial,
    /// Train on `v`, the full feature.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    pub w: Tensor,
    pub b: Tensor,
}

impl LinearClassifier {
    pub fn init(d: usize, classes: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, purpose::BASELINE, 0);
        LinearClassifier {
            w: rng::glorot(&mut r, classes, d),
            b: Tensor::zeros(&[classes]),
        }
    }
}

impl Predictor for LinearClassifier {
    fn classes(&self) -> usize {
        self.w.rows()
    }

    fn dim(&self) -> usize {
        self.w.cols()
    }

    fn predict_batch(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let w = tape.constant(self.w.clone());
        let b = tape.constant(self.b.clone());
        let xv = tape.constant(x.clone());
        let z = tape.affine(w, b, xv)?;
        let p = tape.softmax_rows(z)?;
        Ok(tape.value(p).clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub batch: usize,
    pub epochs: usize,
    /// Adam updates per step of `len / batch` steps per epoch.
    pub updates_per_step: usize,
    pub lr: f64,
    pub seed: u64,
}

/// Trains a linear classifier with Adam on minibatches sampled without
/// replacement, cross-entropy loss.
pub fn train_linear(
    triplets: &[FeatureTriplet],
    source: FeatureSource,
    classes: usize,
    cfg: &BaselineConfig,
) -> Result<LinearClassifier> {
    let first = triplets
        .first()
        .ok_or_else(|| Error::Config("no training triplets".into()))?;
    let d = first.x.len();
    if cfg.batch == 0 || cfg.batch > triplets.len() {
        return Err(Error::Config(format!(
            "batch {} invalid for {} triplets",
            cfg.batch,
            triplets.len()
        )));
    }
    let mut model = LinearClassifier::init(d, classes, cfg.seed);
    let mut adam = Adam::new(cfg.lr, &[model.w.shape(), model.b.shape()]);
    let steps = triplets.len() / cfg.batch;
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, purpose::BASELINE, 1 + epoch as u64);
        for _ in 0..steps * cfg.updates_per_step {
            let idx = sample(&mut r, triplets.len(), cfg.batch);
            let mut data = Vec::with_capacity(cfg.batch * d);
            let mut labels = Vec::with_capacity(cfg.batch);
            for i in idx.iter() {
                let t = &triplets[i];
                let f = match source {
                    FeatureSource::Partial => &t.x,
                    FeatureSource::Full => &t.v,
                };
                if f.len() != d {
                    return Err(Error::dim("train_linear", d, f.len()));
                }
                data.extend_from_slice(f);
                labels.push(t.label);
            }
            let mut tape = Tape::new();
            let w = tape.param(model.w.clone());
            let b = tape.param(model.b.clone());
            let x = tape.constant(Tensor::matrix(cfg.batch, d, data)?);
            let z = tape.affine(w, b, x)?;
            let loss = tape.cross_entropy(z, &labels)?;
            let mut g = tape.backward(loss)?;
            let grads = [g.take(w), g.take(b)];
            adam.step(&mut [&mut model.w, &mut model.b], &grads)?;
        }
    }
    Ok(model)
}
