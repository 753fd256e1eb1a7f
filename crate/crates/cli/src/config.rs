//! Run configuration: one flat TOML table shared by every subcommand.
//!
//! ```toml
//! # synthetic data
//! d = 64
//! classes = 8
//! progress = 10
//! train_per_class = 100
//! test_per_class = 50
//! sigma_v = 0.1
//! sigma_x = 0.2
//! gamma = 1.0
//! # architecture
//! hidden = 48
//! h = 32
//! slots = 64
//! similarity = "dot"          # or "neg_l2"
//! write_mode = "batch_mean"   # or "sequential"
//! # training
//! batch = 64
//! d_steps = 2
//! epochs = 30
//! lr_d = 1e-4
//! lr_g = 1e-4
//! momentum = 0.9
//! lambda_cls = 1.0
//! lambda_rec = 0.1
//! non_saturating = false
//! clip_norm = 0.0             # 0 disables clipping
//! # fusion and seeding
//! beta = 1.5
//! seed = 0
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use amemnet::data::SynthConfig;
use amemnet::memory::{Similarity, WriteMode};
use amemnet::model::ModelConfig;
use amemnet::training::{LossWeights, TrainConfig};
use amemnet::{Error, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub classes: usize,
    pub progress: u8,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub sigma_v: f64,
    pub sigma_x: f64,
    pub gamma: f64,

    pub hidden: usize,
    pub h: usize,
    pub slots: usize,
    pub similarity: String,
    pub write_mode: String,

    pub batch: usize,
    pub d_steps: usize,
    pub epochs: usize,
    pub lr_d: f64,
    pub lr_g: f64,
    pub momentum: f64,
    pub lambda_cls: f64,
    pub lambda_rec: f64,
    pub non_saturating: bool,
    pub clip_norm: f64,

    pub beta: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let arch = ModelConfig::full_scale(synth.classes);
        let train = TrainConfig::default();
        RunConfig {
            d: arch.d,
            classes: synth.classes,
            progress: synth.progress,
            train_per_class: synth.train_per_class,
            test_per_class: synth.test_per_class,
            sigma_v: synth.sigma_v,
            sigma_x: synth.sigma_x,
            gamma: synth.gamma,
            hidden: arch.hidden,
            h: arch.h,
            slots: arch.slots,
            similarity: arch.similarity.to_string(),
            write_mode: arch.write_mode.to_string(),
            batch: train.batch,
            d_steps: train.d_steps,
            epochs: train.epochs,
            lr_d: train.lr_d,
            lr_g: train.lr_g,
            momentum: train.momentum,
            lambda_cls: train.weights.lambda_cls,
            lambda_rec: train.weights.lambda_rec,
            non_saturating: train.non_saturating,
            clip_norm: 0.0,
            beta: amemnet::evalfuse::DEFAULT_BETA,
            seed: train.seed,
        }
    }
}

/// Parses `text`, then applies `key=value` overrides. Override values are
/// TOML literals; anything that does not parse as one is taken as a string.
pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        let v = v.trim();
        let value = format!("x = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("x"))
            .unwrap_or_else(|| toml::Value::String(v.to_string()));
        table.insert(k.trim().to_string(), value);
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            d: self.d,
            classes: self.classes,
            progress: self.progress,
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            sigma_v: self.sigma_v,
            sigma_x: self.sigma_x,
            gamma: self.gamma,
            seed: self.seed,
        }
    }

    /// Architecture for a dataset with `classes` classes.
    pub fn model(&self, classes: usize) -> Result<ModelConfig> {
        let similarity: Similarity = self.similarity.parse()?;
        let write_mode: WriteMode = self.write_mode.parse()?;
        let c = ModelConfig {
            d: self.d,
            hidden: self.hidden,
            h: self.h,
            slots: self.slots,
            classes,
            similarity,
            write_mode,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::Config(format!("clip_norm must be >= 0, got {}", self.clip_norm)));
        }
        let c = TrainConfig {
            batch: self.batch,
            d_steps: self.d_steps,
            epochs: self.epochs,
            lr_d: self.lr_d,
            lr_g: self.lr_g,
            momentum: self.momentum,
            weights: LossWeights {
                lambda_cls: self.lambda_cls,
                lambda_rec: self.lambda_rec,
            },
            seed: self.seed,
            non_saturating: self.non_saturating,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_published_defaults() {
        let c = parse("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!((c.d, c.hidden, c.h, c.slots), (1024, 512, 256, 512));
        assert_eq!((c.batch, c.lr_d, c.lr_g, c.beta), (64, 1e-4, 1e-4, 1.5));
        assert_eq!(c.train().unwrap(), TrainConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse("lambda_res = 1.0\n", &[]).unwrap_err();
        assert!(e.to_string().contains("lambda_res"), "{e}");
        assert!(parse("", &["nope=1".into()]).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let c = parse(
            "slots = 16\nsimilarity = \"dot\"\n",
            &["slots=32".into(), "similarity=neg_l2".into(), "lr_g=0.01".into()],
        )
        .unwrap();
        assert_eq!(c.slots, 32);
        assert_eq!(c.lr_g, 0.01);
        assert_eq!(c.model(3).unwrap().similarity, Similarity::NegL2);
        assert!(parse("", &["slots".into()]).is_err());
    }

    #[test]
    fn wrong_types_and_values_rejected() {
        assert!(parse("slots = \"many\"\n", &[]).is_err());
        assert!(parse("similarity = \"cosine\"\n", &[]).unwrap().model(3).is_err());
        assert!(parse("batch = 1\n", &[]).unwrap().train().is_err());
        assert!(parse("clip_norm = -1.0\n", &[]).unwrap().train().is_err());
        assert_eq!(
            parse("clip_norm = 5.0\n", &[]).unwrap().train().unwrap().clip_norm,
            Some(5.0)
        );
    }
}
