//! Losses, the alternating discriminator/generator objectives, and the
//! training driver.
//!
//! Each step updates the discriminator `d_steps` times (Adam), each time on
//! an independently drawn batch, then the generator once (SGD with momentum)
//! on the next batch of the epoch's shuffled order. Every forward pass in
//! training writes the batch's full features into memory.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;

use crate::data::FeatureTriplet;
use crate::discriminator::{adversarial_logits_on_tape, class_logits_on_tape};
use crate::encoder::{BatchStats, Mode};
use crate::error::{Error, Result};
use crate::memory::generate_on_tape;
use crate::model::Model;
use crate::numerics::{log_sigmoid, log_sum_exp, Tape, Tensor, Var};
use crate::optim::{clip_global_norm, Adam, SgdMomentum};
use crate::rng::{self, purpose};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_cls: f64,
    pub lambda_rec: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cls: 1.0,
            lambda_rec: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_cls", self.lambda_cls), ("lambda_rec", self.lambda_rec)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub epochs: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub momentum: f64,
    pub weights: LossWeights,
    pub seed: u64,
    /// Generator minimizes `-log sigmoid(fake)` instead of the saturating term.
    pub non_saturating: bool,
    /// Optional global-norm gradient clipping, applied to both players.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 64,
            d_steps: 2,
            epochs: 30,
            lr_d: 1e-4,
            lr_g: 1e-4,
            momentum: 0.9,
            weights: LossWeights::default(),
            seed: 0,
            non_saturating: false,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 {
            return Err(Error::Config(format!(
                "batch must be >= 2 for batch norm, got {}",
                self.batch
            )));
        }
        if self.d_steps == 0 {
            return Err(Error::Config("d_steps must be >= 1".into()));
        }
        for (name, v) in [("lr_d", self.lr_d), ("lr_g", self.lr_g)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("clip_norm must be > 0, got {c}")));
            }
        }
        self.weights.validate()
    }
}

/// `log sigma(real) + log(1 - sigma(fake))`, averaged over the batch.
pub fn adv_loss(real_logits: &[f64], fake_logits: &[f64]) -> Result<f64> {
    if real_logits.is_empty() {
        return Err(Error::dim("adv_loss", "non-empty batch", 0));
    }
    if real_logits.len() != fake_logits.len() {
        return Err(Error::dim("adv_loss", real_logits.len(), fake_logits.len()));
    }
    let n = real_logits.len() as f64;
    let real: f64 = real_logits.iter().map(|&r| log_sigmoid(r)).sum();
    let fake: f64 = fake_logits.iter().map(|&f| log_sigmoid(-f)).sum();
    Ok(real / n + fake / n)
}

/// Mean squared Euclidean distance between rows.
pub fn rec_loss(generated: &Tensor, full: &Tensor) -> Result<f64> {
    if generated.shape() != full.shape() || generated.rank() != 2 {
        return Err(Error::dim(
            "rec_loss",
            format!("{:?}", full.shape()),
            format!("{:?}", generated.shape()),
        ));
    }
    if generated.rows() == 0 {
        return Err(Error::dim("rec_loss", "non-empty batch", 0));
    }
    let total: f64 = (0..full.rows())
        .map(|i| {
            generated
                .row(i)
                .iter()
                .zip(full.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(total / full.rows() as f64)
}

/// Mean cross-entropy of `B x K` logits against labels.
pub fn cls_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    if logits.rank() != 2 || logits.rows() != labels.len() {
        return Err(Error::dim(
            "cls_loss",
            format!("{} x K logits", labels.len()),
            format!("{:?}", logits.shape()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::dim("cls_loss", "non-empty batch", 0));
    }
    let k = logits.cols();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::Contract(format!("label {y} out of range for {k} classes")));
        }
        total += log_sum_exp(logits.row(i)) - logits.row(i)[y];
    }
    Ok(total / labels.len() as f64)
}

fn adv_loss_on_tape(tape: &mut Tape, real: Var, fake: Var) -> Result<Var> {
    let lr = tape.log_sigmoid(real);
    let real_term = tape.mean(lr)?;
    let neg = tape.scale(fake, -1.0);
    let lf = tape.log_sigmoid(neg);
    let fake_term = tape.mean(lf)?;
    tape.add(real_term, fake_term)
}

fn rec_loss_on_tape(tape: &mut Tape, generated: Var, full: Var) -> Result<Var> {
    let diff = tape.sub(generated, full)?;
    let sq = tape.row_sum_sq(diff)?;
    tape.mean(sq)
}

/// A training batch: partial features, full features and labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub x: Tensor,
    pub v: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_triplets<'a>(triplets: impl IntoIterator<Item = &'a FeatureTriplet>) -> Result<Self> {
        let mut x = Vec::new();
        let mut v = Vec::new();
        let mut labels = Vec::new();
        let mut d = None;
        for t in triplets {
            let dim = *d.get_or_insert(t.x.len());
            if t.x.len() != dim || t.v.len() != dim {
                return Err(Error::dim("batch", dim, format!("x {} / v {}", t.x.len(), t.v.len())));
            }
            x.extend_from_slice(&t.x);
            v.extend_from_slice(&t.v);
            labels.push(t.label);
        }
        let d = d.ok_or_else(|| Error::dim("batch", "non-empty batch", 0))?;
        let b = labels.len();
        Ok(Batch {
            x: Tensor::matrix(b, d, x)?,
            v: Tensor::matrix(b, d, v)?,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Losses and discriminator accuracies of one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub l_adv: f64,
    pub l_rec: f64,
    pub l_cls_v: f64,
    pub l_cls_x: f64,
    /// Fraction of real features with a positive real/fake logit.
    pub d_real_acc: f64,
    /// Fraction of generated features with a negative real/fake logit.
    pub d_fake_acc: f64,
}

impl StepMetrics {
    fn is_finite(&self) -> bool {
        [self.l_adv, self.l_rec, self.l_cls_v, self.l_cls_x]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Value and gradients of one player's objective at the current model.
#[derive(Clone, Debug)]
pub struct Objective {
    /// The minimized quantity.
    pub loss: f64,
    /// Gradients in the player's tensor order (see [`crate::model`]).
    pub grads: Vec<Tensor>,
    pub metrics: StepMetrics,
    /// Value slots after this forward's memory write.
    pub written: Tensor,
    pub stats: BatchStats,
}

struct Forward {
    tape: Tape,
    real_logits: Var,
    fake_logits: Var,
    l_adv: Var,
    l_rec: Var,
    l_cls_v: Var,
    l_cls_x: Var,
    written: Var,
    stats: BatchStats,
}

fn forward(model: &Model, batch: &Batch, train_generator: bool) -> Result<(Forward, Vec<Var>)> {
    let mut tape = Tape::new();
    let ev = model.encoder.register(&mut tape, train_generator);
    let mv = model.memory.register(&mut tape, train_generator);
    let dv = model.discriminator.register(&mut tape, !train_generator);
    let x = tape.constant(batch.x.clone());
    let v = tape.constant(batch.v.clone());
    let g = generate_on_tape(
        &mut tape,
        &model.encoder,
        &ev,
        &model.memory,
        &mv,
        x,
        Some(v),
        Mode::Train,
    )?;
    let real_logits = adversarial_logits_on_tape(&mut tape, &dv, v)?;
    let fake_logits = adversarial_logits_on_tape(&mut tape, &dv, g.v_hat)?;
    let l_adv = adv_loss_on_tape(&mut tape, real_logits, fake_logits)?;
    let l_rec = rec_loss_on_tape(&mut tape, g.v_hat, v)?;
    let cls_v = class_logits_on_tape(&mut tape, &dv, v)?;
    let l_cls_v = tape.cross_entropy(cls_v, &batch.labels)?;
    let cls_x = class_logits_on_tape(&mut tape, &dv, g.v_hat)?;
    let l_cls_x = tape.cross_entropy(cls_x, &batch.labels)?;
    let params = if train_generator {
        let mut p: Vec<Var> = ev.all().into();
        p.extend(mv.all());
        p
    } else {
        dv.all().into()
    };
    let written = g.write.expect("train mode writes").written;
    let stats = g.stats.expect("train mode has batch statistics");
    Ok((
        Forward {
            tape,
            real_logits,
            fake_logits,
            l_adv,
            l_rec,
            l_cls_v,
            l_cls_x,
            written,
            stats,
        },
        params,
    ))
}

fn finish(f: Forward, loss: Var, params: &[Var]) -> Result<Objective> {
    let mut grads = f.tape.backward(loss)?;
    let frac = |v: Var, positive: bool| {
        let t = f.tape.value(v);
        t.data()
            .iter()
            .filter(|&&z| if positive { z > 0.0 } else { z < 0.0 })
            .count() as f64
            / t.len() as f64
    };
    let metrics = StepMetrics {
        l_adv: f.tape.value(f.l_adv).item(),
        l_rec: f.tape.value(f.l_rec).item(),
        l_cls_v: f.tape.value(f.l_cls_v).item(),
        l_cls_x: f.tape.value(f.l_cls_x).item(),
        d_real_acc: frac(f.real_logits, true),
        d_fake_acc: frac(f.fake_logits, false),
    };
    Ok(Objective {
        loss: f.tape.value(loss).item(),
        grads: params.iter().map(|&p| grads.take(p)).collect(),
        metrics,
        written: f.tape.value(f.written).clone(),
        stats: f.stats,
    })
}

/// Discriminator objective `-L_adv + lambda_cls * L_cls^v`, minimized over
/// the discriminator tensors. The classification term uses real full
/// features only.
pub fn discriminator_objective(model: &Model, batch: &Batch, weights: &LossWeights) -> Result<Objective> {
    let (mut f, params) = forward(model, batch, false)?;
    let neg_adv = f.tape.scale(f.l_adv, -1.0);
    let cls = f.tape.scale(f.l_cls_v, weights.lambda_cls);
    let loss = f.tape.add(neg_adv, cls)?;
    finish(f, loss, &params)
}

/// Generator objective `L_adv + lambda_cls * L_cls^x + lambda_rec * L_rec`,
/// minimized over the encoder and memory tensors. With `non_saturating` the
/// adversarial term is `mean(-log sigma(fake))`.
pub fn generator_objective(
    model: &Model,
    batch: &Batch,
    weights: &LossWeights,
    non_saturating: bool,
) -> Result<Objective> {
    let (mut f, params) = forward(model, batch, true)?;
    let adv = if non_saturating {
        let ls = f.tape.log_sigmoid(f.fake_logits);
        let m = f.tape.mean(ls)?;
        f.tape.scale(m, -1.0)
    } else {
        f.l_adv
    };
    let cls = f.tape.scale(f.l_cls_x, weights.lambda_cls);
    let rec = f.tape.scale(f.l_rec, weights.lambda_rec);
    let partial = f.tape.add(adv, cls)?;
    let loss = f.tape.add(partial, rec)?;
    finish(f, loss, &params)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Discriminator,
    Generator,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Discriminator => "d",
            Phase::Generator => "g",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// 1-based training step; a step holds `d_steps` discriminator rows and
    /// one generator row.
    pub step: usize,
    pub phase: Phase,
    pub metrics: StepMetrics,
}

/// Column order of the training report CSV.
pub const REPORT_HEADER: &str = "step,phase,l_adv,l_rec,l_cls_v,l_cls_x,d_real_acc,d_fake_acc";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<StepRecord>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.records {
            let m = &r.metrics;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.step,
                r.phase.as_str(),
                m.l_adv,
                m.l_rec,
                m.l_cls_v,
                m.l_cls_x,
                m.d_real_acc,
                m.d_fake_acc
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn all_finite(&self) -> bool {
        self.records.iter().all(|r| r.metrics.is_finite())
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }
}

/// Optimizer state of both players plus the step counter.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    adam: Adam,
    sgd: SgdMomentum,
    step: usize,
}

fn check_finite(step: usize, what: &str, obj: &Objective) -> Result<()> {
    if !obj.loss.is_finite() || !obj.metrics.is_finite() {
        return Err(Error::TrainingAborted {
            step,
            detail: format!("non-finite {what} loss ({:?})", obj.metrics),
        });
    }
    if let Some(i) = obj.grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::TrainingAborted {
            step,
            detail: format!("non-finite gradient in {what} tensor {i}"),
        });
    }
    Ok(())
}

impl Trainer {
    pub fn new(model: &Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let d_shapes: Vec<&[usize]> = model.discriminator_tensors().iter().map(|t| t.shape()).collect();
        let g_shapes: Vec<&[usize]> = model.generator_tensors().iter().map(|t| t.shape()).collect();
        Ok(Trainer {
            adam: Adam::new(config.lr_d, &d_shapes),
            sgd: SgdMomentum::new(config.lr_g, config.momentum, &g_shapes)?,
            config,
            step: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Writes `batch` into memory and takes one Adam step on the discriminator.
    pub fn discriminator_step(&mut self, model: &mut Model, batch: &Batch) -> Result<StepMetrics> {
        let mut obj = discriminator_objective(model, batch, &self.config.weights)?;
        check_finite(self.step + 1, "discriminator", &obj)?;
        if let Some(c) = self.config.clip_norm {
            clip_global_norm(&mut obj.grads, c);
        }
        model.memory.values = obj.written;
        model.encoder.update_running(&obj.stats);
        self.adam.step(&mut model.discriminator_tensors_mut(), &obj.grads)?;
        Ok(obj.metrics)
    }

    /// Writes `batch` into memory and takes one momentum step on the
    /// generator. The value-slot gradient, taken with respect to the slots
    /// before the write, is applied to the slots after it.
    pub fn generator_step(&mut self, model: &mut Model, batch: &Batch) -> Result<StepMetrics> {
        let mut obj = generator_objective(model, batch, &self.config.weights, self.config.non_saturating)?;
        check_finite(self.step + 1, "generator", &obj)?;
        if let Some(c) = self.config.clip_norm {
            clip_global_norm(&mut obj.grads, c);
        }
        model.memory.values = obj.written;
        model.encoder.update_running(&obj.stats);
        self.sgd.step(&mut model.generator_tensors_mut(), &obj.grads)?;
        self.step += 1;
        Ok(obj.metrics)
    }
}

fn check_data(model: &Model, triplets: &[FeatureTriplet], config: &TrainConfig) -> Result<()> {
    config.validate()?;
    let d = model.config.d;
    if triplets.len() < config.batch {
        return Err(Error::Config(format!(
            "{} training triplets cannot fill a batch of {}",
            triplets.len(),
            config.batch
        )));
    }
    for t in triplets {
        if t.x.len() != d || t.v.len() != d {
            return Err(Error::dim(
                "train",
                format!("features of length {d}"),
                format!("sample {} with {}", t.sample_id, t.x.len()),
            ));
        }
        if t.label >= model.config.classes {
            return Err(Error::Contract(format!(
                "sample {} has label {} but the model has {} classes",
                t.sample_id, t.label, model.config.classes
            )));
        }
    }
    Ok(())
}

/// Trains `model` on `triplets` for `config.epochs` epochs of
/// `len / batch` steps each. Deterministic for a fixed seed.
pub fn train(mut model: Model, triplets: &[FeatureTriplet], config: &TrainConfig) -> Result<(Model, TrainReport)> {
    check_data(&model, triplets, config)?;
    let mut trainer = Trainer::new(&model, config.clone())?;
    let mut report = TrainReport::default();
    let n = triplets.len();
    let b = config.batch;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(
            &mut order[..],
            &mut rng::stream(config.seed, purpose::SHUFFLE, epoch as u64),
        );
        let mut d_rng = rng::stream(config.seed, purpose::D_BATCH, epoch as u64);
        for g_idx in order.chunks_exact(b) {
            let step = trainer.steps() + 1;
            for _ in 0..config.d_steps {
                let idx = sample(&mut d_rng, n, b);
                let batch = Batch::from_triplets(idx.iter().map(|i| &triplets[i]))?;
                let metrics = trainer.discriminator_step(&mut model, &batch)?;
                report.records.push(StepRecord {
                    step,
                    phase: Phase::Discriminator,
                    metrics,
                });
            }
            let batch = Batch::from_triplets(g_idx.iter().map(|&i| &triplets[i]))?;
            let metrics = trainer.generator_step(&mut model, &batch)?;
            report.records.push(StepRecord {
                step,
                phase: Phase::Generator,
                metrics,
            });
        }
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::DiscriminatorParams;
    use crate::memory::{Similarity, WriteMode};
    use crate::model::ModelConfig;
    use crate::numerics::{finite_diff_check_with, Stencil, Tensor};

    const LOG_HALF_2: f64 = -1.3862943611198906;

    fn mini() -> ModelConfig {
        ModelConfig {
            d: 6,
            hidden: 4,
            h: 3,
            slots: 4,
            classes: 3,
            similarity: Similarity::Dot,
            write_mode: WriteMode::BatchMean,
        }
    }

    fn batch(seed: u64, b: usize, d: usize, k: usize) -> Batch {
        let mut r = rng::stream(seed, purpose::SAMPLE, 99);
        let mut t = |n| Tensor::matrix(b, d, (0..n).map(|_| rng::normal(&mut r)).collect()).unwrap();
        let x = t(b * d);
        let v = t(b * d);
        Batch {
            x,
            v,
            labels: (0..b).map(|i| i % k).collect(),
        }
    }

    #[test]
    fn adv_loss_examples() {
        assert!((adv_loss(&[0.0, 0.0], &[0.0, 0.0]).unwrap() - LOG_HALF_2).abs() < 1e-15);
        let sat = adv_loss(&[20.0], &[-20.0]).unwrap();
        assert!(sat.is_finite() && sat < 0.0 && sat > -1e-8);
        // Scalar oracle: ln(1/(1+e^-r)) + ln(1 - 1/(1+e^-f)).
        let (r, f) = ([1.5, -0.5], [0.25, -2.0]);
        let oracle = r
            .iter()
            .zip(&f)
            .map(|(r, f): (&f64, &f64)| (1.0 / (1.0 + (-r).exp())).ln() + (1.0 - 1.0 / (1.0 + (-f).exp())).ln())
            .sum::<f64>()
            / 2.0;
        assert!((adv_loss(&r, &f).unwrap() - oracle).abs() < 1e-14);
        assert!(adv_loss(&[], &[]).is_err());
        assert!(adv_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rec_loss_examples() {
        let v = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(rec_loss(&v, &v).unwrap(), 0.0);
        let g = Tensor::from_rows(&[[2.0, 3.0]]).unwrap();
        assert_eq!(rec_loss(&g, &v).unwrap(), 2.0);
        let b = batch(1, 5, 4, 2);
        let mut brute = 0.0;
        for i in 0..5 {
            for j in 0..4 {
                let d = b.x.data()[i * 4 + j] - b.v.data()[i * 4 + j];
                brute += d * d;
            }
        }
        assert!((rec_loss(&b.x, &b.v).unwrap() - brute / 5.0).abs() < 1e-13);
        assert!(rec_loss(&v, &b.v).is_err());
    }

    #[test]
    fn cls_loss_examples() {
        let uniform = Tensor::zeros(&[2, 4]);
        assert!((cls_loss(&uniform, &[0, 3]).unwrap() - 4f64.ln()).abs() < 1e-15);
        let sure = Tensor::from_rows(&[[20.0, 0.0, 0.0]]).unwrap();
        assert!(cls_loss(&sure, &[0]).unwrap() < 1e-8);
        let z = [0.5f64, -1.0, 2.0];
        let p1 = z[1].exp() / z.iter().map(|v| v.exp()).sum::<f64>();
        let logits = Tensor::from_rows(&[z]).unwrap();
        assert!((cls_loss(&logits, &[1]).unwrap() + p1.ln()).abs() < 1e-14);
        assert!(cls_loss(&logits, &[3]).is_err());
    }

    #[test]
    fn identical_features_give_flat_adversarial_gradient() {
        // A generator whose output equals the real features: zero key and
        // value slots, gates irrelevant, and x = v.
        let mut model = Model::init(mini(), 1).unwrap();
        model.discriminator.w_adv = Tensor::zeros(&[6]);
        model.discriminator.b_adv = Tensor::zeros(&[1]);
        model.memory.values = Tensor::zeros(&[4, 6]);
        model.memory.w_add = Tensor::zeros(&[6, 6]);
        let mut b = batch(2, 4, 6, 3);
        b.x = b.v.clone();
        let w = LossWeights {
            lambda_cls: 0.0,
            lambda_rec: 0.1,
        };
        let obj = discriminator_objective(&model, &b, &w).unwrap();
        assert!(
            obj.grads[2].data().iter().all(|g| g.abs() < 1e-15),
            "{:?}",
            obj.grads[2]
        );
        assert!((obj.metrics.l_adv - LOG_HALF_2).abs() < 1e-12);
    }

    #[test]
    fn flat_critic_gives_zero_generator_gradient() {
        let mut model = Model::init(mini(), 2).unwrap();
        model.discriminator = DiscriminatorParams::zeros(6, 3);
        let w = LossWeights {
            lambda_cls: 0.0,
            lambda_rec: 0.0,
        };
        let obj = generator_objective(&model, &batch(3, 3, 6, 3), &w, false).unwrap();
        assert!(obj.grads.iter().all(|g| g.data().iter().all(|v| *v == 0.0)));
    }

    fn fd_check(model: &Model, b: &Batch, generator: bool, non_saturating: bool) -> f64 {
        let w = LossWeights {
            lambda_cls: 0.7,
            lambda_rec: 0.3,
        };
        let obj = if generator {
            generator_objective(model, b, &w, non_saturating).unwrap()
        } else {
            discriminator_objective(model, b, &w).unwrap()
        };
        let params: Vec<Tensor> = if generator {
            model.generator_tensors().into_iter().cloned().collect()
        } else {
            model.discriminator_tensors().into_iter().cloned().collect()
        };
        let report = finite_diff_check_with(&params, &obj.grads, 1e-3, Stencil::FivePoint, |p| {
            let mut m = model.clone();
            let targets = if generator {
                m.generator_tensors_mut()
            } else {
                m.discriminator_tensors_mut()
            };
            for (t, v) in targets.into_iter().zip(p) {
                *t = v.clone();
            }
            Ok(if generator {
                generator_objective(&m, b, &w, non_saturating)?.loss
            } else {
                discriminator_objective(&m, b, &w)?.loss
            })
        })
        .unwrap();
        report.max_rel_error
    }

    #[test]
    fn objectives_match_finite_differences() {
        let model = Model::init(mini(), 3).unwrap();
        let b = batch(4, 2, 6, 3);
        assert!(fd_check(&model, &b, false, false) < 1e-4);
        assert!(fd_check(&model, &b, true, false) < 1e-4);
        assert!(fd_check(&model, &b, true, true) < 1e-4);
    }

    #[test]
    fn steps_respect_parameter_partition() {
        let mut model = Model::init(mini(), 5).unwrap();
        let mut trainer = Trainer::new(
            &model,
            TrainConfig {
                batch: 4,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let b = batch(6, 4, 6, 3);
        let before = model.clone();
        trainer.discriminator_step(&mut model, &b).unwrap();
        // The value slots move only through the write.
        for (i, (a, c)) in before
            .generator_tensors()
            .into_iter()
            .zip(model.generator_tensors())
            .enumerate()
        {
            if i != 6 {
                assert_eq!(a, c, "generator tensor {i}");
            }
        }
        assert_eq!(before.encoder.trainable(), model.encoder.trainable());
        assert_ne!(before.discriminator, model.discriminator);
        let mid = model.clone();
        trainer.generator_step(&mut model, &b).unwrap();
        assert_eq!(mid.discriminator, model.discriminator);
        assert_ne!(mid.encoder.w1, model.encoder.w1);
    }

    fn triplets(n: usize, d: usize, k: usize) -> Vec<FeatureTriplet> {
        let mut r = rng::stream(9, purpose::SAMPLE, 1);
        (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..d).map(|_| rng::normal(&mut r)).collect();
                FeatureTriplet {
                    sample_id: i as u32,
                    progress: 1,
                    x: v.iter().map(|a| 0.5 * a).collect(),
                    v,
                    label: i % k,
                }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_is_identity_and_training_is_deterministic() {
        let model = Model::init(mini(), 7).unwrap();
        let data = triplets(20, 6, 3);
        let cfg = TrainConfig {
            batch: 4,
            epochs: 0,
            ..TrainConfig::default()
        };
        let (same, report) = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(same, model);
        assert!(report.records.is_empty());

        let cfg = TrainConfig { epochs: 2, ..cfg };
        let (a, ra) = train(model.clone(), &data, &cfg).unwrap();
        let (b, rb) = train(model.clone(), &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.to_csv(), rb.to_csv());
        // 2 epochs x 5 steps x (2 D rows + 1 G row).
        assert_eq!(ra.records.len(), 30);
        assert!(ra.all_finite());
        assert_ne!(a, model);
    }

    #[test]
    fn dimension_mismatch_rejected_before_training() {
        let model = Model::init(mini(), 7).unwrap();
        let data = triplets(20, 5, 3);
        assert!(train(
            model.clone(),
            &data,
            &TrainConfig {
                batch: 4,
                ..TrainConfig::default()
            }
        )
        .is_err());
        let data = triplets(3, 6, 3);
        assert!(train(
            model,
            &data,
            &TrainConfig {
                batch: 4,
                ..TrainConfig::default()
            }
        )
        .is_err());
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut model = Model::init(mini(), 8).unwrap();
        let mut trainer = Trainer::new(
            &model,
            TrainConfig {
                batch: 2,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let mut b = batch(1, 2, 6, 3);
        b.v.data_mut()[0] = f64::INFINITY;
        let err = trainer.discriminator_step(&mut model, &b).unwrap_err();
        assert!(matches!(err, Error::TrainingAborted { step: 1, .. }), "{err}");
    }

    #[test]
    fn report_csv_layout() {
        let model = Model::init(mini(), 7).unwrap();
        let cfg = TrainConfig {
            batch: 10,
            epochs: 1,
            d_steps: 1,
            ..TrainConfig::default()
        };
        let (_, r) = train(model, &triplets(20, 6, 3), &cfg).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,d,"));
        assert!(lines[2].starts_with("1,g,"));
        assert!(lines[4].starts_with("2,g,"));
    }
}
