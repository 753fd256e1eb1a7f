//! Synthetic two-stream benchmark.
//!
//! Class `k` of a stream has a prototype `c_k ~ N(0, I)`. A sample draws a
//! nuisance `u ~ N(0, I)`, its full feature `v = c_k + sigma_v * eps` and, per
//! progress level, `x_p = rho_p * v + (1 - rho_p) * u + sigma_x * eta_p` with
//! `rho_p = (p / P)^gamma`.
//!
//! Random streams (see [`crate::rng`]): stream `s` (0 = rgb, 1 = flow) draws
//! its prototypes row by row from `PROTOTYPE/s`, and sample `i` draws `u`,
//! then `eps`, then `eta_1 .. eta_P` from `SAMPLE/(s << 32 | i)`. Generation
//! order therefore cannot change the result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::FeatureDataset;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

pub const STREAMS: [&str; 2] = ["rgb", "flow"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub d: usize,
    pub classes: usize,
    pub progress: u8,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub sigma_v: f64,
    pub sigma_x: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            d: 64,
            classes: 8,
            progress: 10,
            train_per_class: 100,
            test_per_class: 50,
            sigma_v: 0.1,
            sigma_x: 0.2,
            gamma: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.classes == 0 || self.progress == 0 {
            return Err(Error::Config(
                "synthetic d, classes and progress must be positive".into(),
            ));
        }
        if self.train_per_class + self.test_per_class == 0 {
            return Err(Error::Config("synthetic dataset would be empty".into()));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_x >= 0.0 && self.sigma_v.is_finite() && self.sigma_x.is_finite()) {
            return Err(Error::Config("sigma_v and sigma_x must be finite and >= 0".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config("gamma must be finite and > 0".into()));
        }
        let total = (self.train_per_class + self.test_per_class) * self.classes;
        if total > u32::MAX as usize {
            return Err(Error::Config("too many synthetic samples for 32-bit ids".into()));
        }
        Ok(())
    }

    fn samples(&self) -> usize {
        (self.train_per_class + self.test_per_class) * self.classes
    }

    /// Ids `0 .. K*train` are training samples; class of id `i` is `i mod K`.
    fn is_train(&self, id: u32) -> bool {
        (id as usize) < self.train_per_class * self.classes
    }
}

/// Every draw behind one synthetic sample, in f64 before storage rounding.
#[derive(Clone, Debug)]
pub struct SampleDraw {
    pub label: usize,
    pub prototype: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `x[p - 1]` is the partial feature at progress `p`.
    pub x: Vec<Vec<f64>>,
}

fn prototypes(cfg: &SynthConfig, stream: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(cfg.seed, purpose::PROTOTYPE, stream as u64);
    (0..cfg.classes)
        .map(|_| (0..cfg.d).map(|_| rng::normal(&mut r)).collect())
        .collect()
}

fn draw(cfg: &SynthConfig, stream: usize, id: u32, protos: &[Vec<f64>]) -> SampleDraw {
    let label = id as usize % cfg.classes;
    let mut r = rng::stream(cfg.seed, purpose::SAMPLE, ((stream as u64) << 32) | id as u64);
    let c = &protos[label];
    let u: Vec<f64> = (0..cfg.d).map(|_| rng::normal(&mut r)).collect();
    let v: Vec<f64> = c.iter().map(|&ci| ci + cfg.sigma_v * rng::normal(&mut r)).collect();
    let pp = cfg.progress as f64;
    let x = (1..=cfg.progress)
        .map(|p| {
            let rho = (p as f64 / pp).powf(cfg.gamma);
            v.iter()
                .zip(&u)
                .map(|(&vi, &ui)| rho * vi + (1.0 - rho) * ui + cfg.sigma_x * rng::normal(&mut r))
                .collect()
        })
        .collect();
    SampleDraw {
        label,
        prototype: c.clone(),
        u,
        v,
        x,
    }
}

/// Recomputes the draws of one sample of stream `stream` (0 = rgb, 1 = flow).
pub fn sample_draw(cfg: &SynthConfig, stream: usize, id: u32) -> Result<SampleDraw> {
    cfg.validate()?;
    if stream >= STREAMS.len() || id as usize >= cfg.samples() {
        return Err(Error::UnknownSample(id));
    }
    Ok(draw(cfg, stream, id, &prototypes(cfg, stream)))
}

/// Generates the `rgb` and `flow` datasets with identical ids, labels and
/// splits but independent features.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(FeatureDataset, FeatureDataset)> {
    cfg.validate()?;
    let rgb = generate_stream(cfg, 0)?;
    let flow = generate_stream(cfg, 1)?;
    Ok((rgb, flow))
}

fn generate_stream(cfg: &SynthConfig, stream: usize) -> Result<FeatureDataset> {
    let protos = prototypes(cfg, stream);
    let ids: Vec<u32> = (0..cfg.samples() as u32).collect();
    #[cfg(feature = "parallel")]
    let draws: Vec<SampleDraw> = ids.par_iter().map(|&id| draw(cfg, stream, id, &protos)).collect();
    #[cfg(not(feature = "parallel"))]
    let draws: Vec<SampleDraw> = ids.iter().map(|&id| draw(cfg, stream, id, &protos)).collect();

    let mut ds = FeatureDataset::new(cfg.d, cfg.classes, cfg.progress, STREAMS[stream])?;
    for (&id, s) in ids.iter().zip(draws) {
        for (p, x) in s.x.into_iter().enumerate() {
            let feats = x.into_iter().map(|f| f as f32).collect();
            ds.insert(id, p as u8 + 1, s.label as u16, feats)?;
        }
        if cfg.is_train(id) {
            ds.train_ids.push(id);
        } else {
            ds.test_ids.push(id);
        }
    }
    Ok(ds)
}
