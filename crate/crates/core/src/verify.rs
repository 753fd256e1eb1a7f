//! Finite-difference gradient suite for both training objectives on a
//! miniature model (d=6, h1=4, h=3, N=4, K=3, B=2).
//!
//! At B=2 batch norm maps every feature to about ±1 unless the two
//! pre-activations differ by roughly sqrt(eps) or less; otherwise gradients
//! reaching the first encoder layer shrink to ~1e-7 and the check measures
//! rounding noise. The partial features of the check batch are therefore two
//! nearby points (spread 0.005), and differences use the five-point stencil.

use crate::error::Result;
use crate::memory::{Similarity, WriteMode};
use crate::model::{Model, ModelConfig, DISCRIMINATOR_TENSORS, GENERATOR_TENSORS};
use crate::numerics::{finite_diff_check_with, Stencil, Tensor};
use crate::rng::{self, purpose};
use crate::training::{discriminator_objective, generator_objective, Batch, LossWeights};

pub const TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-3;
const SPREAD: f64 = 0.005;

pub fn miniature(similarity: Similarity, write_mode: WriteMode) -> ModelConfig {
    ModelConfig {
        d: 6,
        hidden: 4,
        h: 3,
        slots: 4,
        classes: 3,
        similarity,
        write_mode,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Discriminator,
    Generator,
    GeneratorNonSaturating,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Discriminator => "discriminator",
            Objective::Generator => "generator",
            Objective::GeneratorNonSaturating => "generator(non-saturating)",
        }
    }

    fn tensor_names(self) -> &'static [&'static str] {
        match self {
            Objective::Discriminator => &DISCRIMINATOR_TENSORS,
            _ => &GENERATOR_TENSORS,
        }
    }

    fn evaluate(self, model: &Model, batch: &Batch, w: &LossWeights) -> Result<crate::training::Objective> {
        match self {
            Objective::Discriminator => discriminator_objective(model, batch, w),
            Objective::Generator => generator_objective(model, batch, w, false),
            Objective::GeneratorNonSaturating => generator_objective(model, batch, w, true),
        }
    }

    fn params(self, model: &Model) -> Vec<Tensor> {
        match self {
            Objective::Discriminator => model.discriminator_tensors().into_iter().cloned().collect(),
            _ => model.generator_tensors().into_iter().cloned().collect(),
        }
    }

    fn set_params(self, model: &mut Model, params: &[Tensor]) {
        let targets = match self {
            Objective::Discriminator => model.discriminator_tensors_mut(),
            _ => model.generator_tensors_mut(),
        };
        for (t, p) in targets.into_iter().zip(params) {
            *t = p.clone();
        }
    }
}

/// Worst relative error of one parameter tensor in one case.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupResult {
    pub case: String,
    pub tensor: &'static str,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub groups: Vec<GroupResult>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_error < TOLERANCE)
    }

    /// Worst error per tensor name over all cases, in first-seen order.
    pub fn by_tensor(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<(&'static str, f64)> = Vec::new();
        for g in &self.groups {
            match out.iter_mut().find(|(n, _)| *n == g.tensor) {
                Some((_, e)) => *e = e.max(g.max_rel_error),
                None => out.push((g.tensor, g.max_rel_error)),
            }
        }
        out
    }
}

fn random_batch(seed: u64, cfg: &ModelConfig, b: usize) -> Result<Batch> {
    let mut r = rng::stream(seed, purpose::SAMPLE, 1 << 40);
    let base: Vec<f64> = (0..cfg.d).map(|_| rng::normal(&mut r)).collect();
    let x = Tensor::matrix(
        b,
        cfg.d,
        (0..b * cfg.d)
            .map(|i| base[i % cfg.d] + SPREAD * rng::normal(&mut r))
            .collect(),
    )?;
    let v = Tensor::matrix(b, cfg.d, (0..b * cfg.d).map(|_| rng::normal(&mut r)).collect())?;
    Ok(Batch {
        x,
        v,
        labels: (0..b).map(|i| (i + seed as usize) % cfg.classes).collect(),
    })
}

/// Checks one objective for one model configuration.
pub fn check_case(objective: Objective, config: ModelConfig, seed: u64) -> Result<Vec<GroupResult>> {
    let model = Model::init(config.clone(), seed)?;
    let batch = random_batch(seed, &config, 2)?;
    // Non-default weights so every term contributes.
    let weights = LossWeights {
        lambda_cls: 0.7,
        lambda_rec: 0.3,
    };
    let analytic = objective.evaluate(&model, &batch, &weights)?.grads;
    let params = objective.params(&model);
    let report = finite_diff_check_with(&params, &analytic, STEP, Stencil::FivePoint, |p| {
        let mut m = model.clone();
        objective.set_params(&mut m, p);
        Ok(objective.evaluate(&m, &batch, &weights)?.loss)
    })?;
    let case = format!(
        "{} {}/{} seed {seed}",
        objective.name(),
        config.similarity,
        config.write_mode
    );
    Ok(objective
        .tensor_names()
        .iter()
        .zip(report.per_tensor)
        .map(|(&tensor, e)| GroupResult {
            case: case.clone(),
            tensor,
            max_rel_error: e,
        })
        .collect())
}

/// Every objective under both similarities and both write modes.
pub fn run_suite(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for similarity in [Similarity::Dot, Similarity::NegL2] {
        for write_mode in [WriteMode::BatchMean, WriteMode::Sequential] {
            for objective in [
                Objective::Discriminator,
                Objective::Generator,
                Objective::GeneratorNonSaturating,
            ] {
                report
                    .groups
                    .extend(check_case(objective, miniature(similarity, write_mode), seed)?);
            }
        }
    }
    Ok(report)
}
