//! WebAssembly bindings for the static page in `www/`. A [`Demo`] trains
//! one tiny model per stream on a small synthetic benchmark, then answers
//! three kinds of queries: accuracy per observation ratio (against a
//! linear head trained on partial features), attention of a test sample
//! over the memory slots, and fused accuracy for a chosen beta.

use amemnet::baseline::{train_linear, BaselineConfig, FeatureSource};
use amemnet::data::{build_triplets, generate_synthetic, FeatureDataset, SynthConfig};
use amemnet::evalfuse::{evaluate_by_ratio, fuse_streams, ScoreTable};
use amemnet::memory::{Similarity, WriteMode};
use amemnet::model::{Model, ModelConfig};
use amemnet::numerics::Tensor;
use amemnet::training::{train, LossWeights, TrainConfig};
use amemnet::{Error, Result};
use wasm_bindgen::prelude::*;

/// Knobs exposed on the page. Everything else is fixed small.
#[derive(Clone, Debug)]
pub struct DemoConfig {
    pub seed: u64,
    pub slots: usize,
    pub lambda_rec: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 0,
            slots: 16,
            lambda_rec: 0.1,
            epochs: 15,
            lr: 1e-3,
        }
    }
}

struct Stream {
    data: FeatureDataset,
    model: Model,
    scores: ScoreTable,
    accuracy: Vec<f64>,
    losses: Vec<f64>,
}

#[wasm_bindgen]
pub struct Demo {
    rgb: Stream,
    flow: Stream,
    baseline: Vec<f64>,
}

fn synth(seed: u64) -> SynthConfig {
    SynthConfig {
        d: 16,
        classes: 4,
        progress: 10,
        train_per_class: 40,
        test_per_class: 20,
        seed,
        ..SynthConfig::default()
    }
}

fn train_stream(data: FeatureDataset, cfg: &DemoConfig) -> Result<Stream> {
    let arch = ModelConfig {
        d: data.dim,
        hidden: 12,
        h: 8,
        slots: cfg.slots,
        classes: data.classes,
        similarity: Similarity::Dot,
        write_mode: WriteMode::BatchMean,
    };
    let tc = TrainConfig {
        batch: 32,
        epochs: cfg.epochs,
        lr_d: cfg.lr,
        lr_g: cfg.lr,
        weights: LossWeights {
            lambda_rec: cfg.lambda_rec,
            ..LossWeights::default()
        },
        seed: cfg.seed,
        ..TrainConfig::default()
    };
    let triplets = build_triplets(&data, &data.train_ids)?;
    let (model, report) = train(Model::init(arch, cfg.seed)?, &triplets, &tc)?;
    let ev = evaluate_by_ratio(&data, &data.test_ids, &model)?;
    Ok(Stream {
        losses: report
            .phase(amemnet::training::Phase::Generator)
            .map(|r| r.metrics.l_rec)
            .collect(),
        data,
        model,
        scores: ev.table,
        accuracy: ev.accuracy,
    })
}

impl Demo {
    pub fn build(cfg: &DemoConfig) -> Result<Demo> {
        let (rgb, flow) = generate_synthetic(&synth(cfg.seed))?;
        let triplets = build_triplets(&rgb, &rgb.train_ids)?;
        let head = train_linear(
            &triplets,
            FeatureSource::Partial,
            rgb.classes,
            &BaselineConfig {
                batch: 32,
                epochs: cfg.epochs,
                updates_per_step: 2,
                lr: cfg.lr,
                seed: cfg.seed,
            },
        )?;
        let baseline = evaluate_by_ratio(&rgb, &rgb.test_ids, &head)?.accuracy;
        Ok(Demo {
            rgb: train_stream(rgb, cfg)?,
            flow: train_stream(flow, cfg)?,
            baseline,
        })
    }

    fn stream(&self, name: &str) -> Result<&Stream> {
        match name {
            "rgb" => Ok(&self.rgb),
            "flow" => Ok(&self.flow),
            other => Err(Error::Config(format!("unknown stream `{other}`"))),
        }
    }

    fn features(&self, stream: &str, id: u32, p: u8) -> Result<Tensor> {
        let s = self.stream(stream)?;
        let rec = s.data.record(id, p).ok_or(Error::UnknownSample(id))?;
        Tensor::matrix(1, s.data.dim, rec.features.iter().map(|&f| f as f64).collect())
    }

    pub fn try_attention(&self, stream: &str, id: u32, p: u8) -> Result<Vec<f64>> {
        let x = self.features(stream, id, p)?;
        Ok(self.stream(stream)?.model.attention_eval(&x)?.into_data())
    }

    pub fn try_probabilities(&self, stream: &str, id: u32, p: u8) -> Result<Vec<f64>> {
        let x = self.features(stream, id, p)?;
        Ok(self.stream(stream)?.model.predict_batch(&x)?.into_data())
    }

    pub fn try_fused(&self, beta: f64) -> Result<Vec<f64>> {
        Ok(fuse_streams(&self.rgb.scores, &self.flow.scores, beta)?.1)
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Demo {
    /// Generates the data and trains both streams; takes a few seconds.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, slots: u32, lambda_rec: f64, epochs: u32, lr: f64) -> Result<Demo, JsError> {
        Demo::build(&DemoConfig {
            seed: seed as u64,
            slots: slots as usize,
            lambda_rec,
            epochs: epochs as usize,
            lr,
        })
        .map_err(js)
    }

    /// Test accuracy per observation ratio for `rgb` or `flow`.
    pub fn accuracy(&self, stream: &str) -> Result<Vec<f64>, JsError> {
        self.stream(stream).map(|s| s.accuracy.clone()).map_err(js)
    }

    /// Linear head trained directly on rgb partial features.
    pub fn baseline(&self) -> Vec<f64> {
        self.baseline.clone()
    }

    /// Reconstruction loss after every generator update.
    pub fn reconstruction_curve(&self, stream: &str) -> Result<Vec<f64>, JsError> {
        self.stream(stream).map(|s| s.losses.clone()).map_err(js)
    }

    pub fn test_ids(&self) -> Vec<u32> {
        self.rgb.data.test_ids.clone()
    }

    pub fn label(&self, id: u32) -> Result<u32, JsError> {
        self.rgb
            .data
            .label_of(id)
            .map(u32::from)
            .ok_or_else(|| js(Error::UnknownSample(id)))
    }

    pub fn classes(&self) -> u32 {
        self.rgb.data.classes as u32
    }

    pub fn attention(&self, stream: &str, id: u32, p: u8) -> Result<Vec<f64>, JsError> {
        self.try_attention(stream, id, p).map_err(js)
    }

    pub fn probabilities(&self, stream: &str, id: u32, p: u8) -> Result<Vec<f64>, JsError> {
        self.try_probabilities(stream, id, p).map_err(js)
    }

    /// Accuracy per observation ratio of `rgb + beta * flow`.
    pub fn fused(&self, beta: f64) -> Result<Vec<f64>, JsError> {
        self.try_fused(beta).map_err(js)
    }
}
