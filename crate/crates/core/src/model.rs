use crate::discriminator::{class_logits_on_tape, DiscriminatorParams};
use crate::encoder::{EncoderParams, Mode};
use crate::error::{Error, Result};
use crate::memory::{generate_on_tape, MemoryState, Similarity, WriteMode};
use crate::numerics::{Tape, Tensor};
use crate::rng::{self, purpose};

/// Architecture sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Feature dimension.
    pub d: usize,
    /// Hidden width of the query encoder.
    pub hidden: usize,
    /// Query embedding dimension.
    pub h: usize,
    /// Number of memory slots.
    pub slots: usize,
    pub classes: usize,
    pub similarity: Similarity,
    pub write_mode: WriteMode,
}

impl ModelConfig {
    /// 1024-d features, 512 hidden units, 256-d queries and 512 slots.
    pub fn full_scale(classes: usize) -> Self {
        ModelConfig {
            d: 1024,
            hidden: 512,
            h: 256,
            slots: 512,
            classes,
            similarity: Similarity::Dot,
            write_mode: WriteMode::BatchMean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d", self.d),
            ("hidden", self.hidden),
            ("h", self.h),
            ("slots", self.slots),
            ("classes", self.classes),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Encoder, memory generator and discriminator of one stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub encoder: EncoderParams,
    pub memory: MemoryState,
    pub discriminator: DiscriminatorParams,
}

/// Names of the generator tensors, in optimizer order.
pub const GENERATOR_TENSORS: [&str; 9] = [
    "encoder.w1",
    "encoder.gamma",
    "encoder.beta",
    "encoder.w2",
    "encoder.b2",
    "memory.keys",
    "memory.values",
    "memory.w_erase",
    "memory.w_add",
];

/// Names of the discriminator tensors, in optimizer order.
pub const DISCRIMINATOR_TENSORS: [&str; 4] = ["disc.w_cls", "disc.b_cls", "disc.w_adv", "disc.b_adv"];

/// Every tensor stored in a model archive.
pub const ALL_TENSORS: [&str; 15] = [
    "encoder.w1",
    "encoder.gamma",
    "encoder.beta",
    "encoder.running_mean",
    "encoder.running_var",
    "encoder.w2",
    "encoder.b2",
    "memory.keys",
    "memory.values",
    "memory.w_erase",
    "memory.w_add",
    "disc.w_cls",
    "disc.b_cls",
    "disc.w_adv",
    "disc.b_adv",
];

impl Model {
    /// Random initialization from `seed`; every value is f32-representable.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, purpose::MODEL_INIT, 0);
        let encoder = EncoderParams::init(config.d, config.hidden, config.h, &mut r);
        let mut memory = MemoryState::init(config.slots, config.h, config.d, config.similarity, &mut r);
        memory.write_mode = config.write_mode;
        let discriminator = DiscriminatorParams::init(config.d, config.classes, &mut r);
        Ok(Model {
            config,
            encoder,
            memory,
            discriminator,
        })
    }

    pub fn generator_tensors(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.encoder.trainable().into();
        v.extend(self.memory.trainable());
        v
    }

    pub fn generator_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.encoder.trainable_mut().into();
        v.extend(self.memory.trainable_mut());
        v
    }

    pub fn discriminator_tensors(&self) -> Vec<&Tensor> {
        self.discriminator.trainable().into()
    }

    pub fn discriminator_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.discriminator.trainable_mut().into()
    }

    /// All archived tensors, in [`ALL_TENSORS`] order.
    pub fn named_tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let e = &self.encoder;
        let m = &self.memory;
        let d = &self.discriminator;
        let ts = [
            &e.w1,
            &e.gamma,
            &e.beta,
            &e.running_mean,
            &e.running_var,
            &e.w2,
            &e.b2,
            &m.keys,
            &m.values,
            &m.w_erase,
            &m.w_add,
            &d.w_cls,
            &d.b_cls,
            &d.w_adv,
            &d.b_adv,
        ];
        ALL_TENSORS.into_iter().zip(ts).collect()
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let e = &mut self.encoder;
        let m = &mut self.memory;
        let d = &mut self.discriminator;
        let ts = [
            &mut e.w1,
            &mut e.gamma,
            &mut e.beta,
            &mut e.running_mean,
            &mut e.running_var,
            &mut e.w2,
            &mut e.b2,
            &mut m.keys,
            &mut m.values,
            &mut m.w_erase,
            &mut m.w_add,
            &mut d.w_cls,
            &mut d.b_cls,
            &mut d.w_adv,
            &mut d.b_adv,
        ];
        ALL_TENSORS.into_iter().zip(ts).collect()
    }

    /// Expected shape of an archived tensor under this model's config.
    pub fn expected_shape(config: &ModelConfig, name: &str) -> Option<Vec<usize>> {
        let ModelConfig {
            d,
            hidden,
            h,
            slots,
            classes,
            ..
        } = *config;
        Some(match name {
            "encoder.w1" => vec![hidden, d],
            "encoder.gamma" | "encoder.beta" | "encoder.running_mean" | "encoder.running_var" => vec![hidden],
            "encoder.w2" => vec![h, hidden],
            "encoder.b2" => vec![h],
            "memory.keys" => vec![slots, h],
            "memory.values" => vec![slots, d],
            "memory.w_erase" | "memory.w_add" => vec![d, d],
            "disc.w_cls" => vec![classes, d],
            "disc.b_cls" => vec![classes],
            "disc.w_adv" => vec![d],
            "disc.b_adv" => vec![1],
            _ => return None,
        })
    }

    /// Rounds every tensor to f32 precision, as saving does.
    pub fn round_to_f32(&mut self) {
        for (_, t) in self.named_tensors_mut() {
            t.round_to_f32();
        }
    }

    /// Eval-mode generated features for a `B x d` batch: running batch-norm
    /// statistics, no memory write.
    pub fn generate_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ev = self.encoder.register(&mut tape, false);
        let mv = self.memory.register(&mut tape, false);
        let xv = tape.constant(x.clone());
        let g = generate_on_tape(&mut tape, &self.encoder, &ev, &self.memory, &mv, xv, None, Mode::Eval)?;
        Ok(tape.value(g.v_hat).clone())
    }

    /// Eval-mode `B x N` attention of each partial feature over the slots.
    pub fn attention_eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ev = self.encoder.register(&mut tape, false);
        let mv = self.memory.register(&mut tape, false);
        let xv = tape.constant(x.clone());
        let g = generate_on_tape(&mut tape, &self.encoder, &ev, &self.memory, &mv, xv, None, Mode::Eval)?;
        Ok(tape.value(g.alpha).clone())
    }

    /// Eval-mode class probabilities for a `B x d` batch.
    pub fn predict_batch(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.cols() != self.config.d {
            return Err(Error::dim(
                "predict",
                format!("B x {}", self.config.d),
                format!("{:?}", x.shape()),
            ));
        }
        let mut tape = Tape::new();
        let ev = self.encoder.register(&mut tape, false);
        let mv = self.memory.register(&mut tape, false);
        let dv = self.discriminator.register(&mut tape, false);
        let xv = tape.constant(x.clone());
        let g = generate_on_tape(&mut tape, &self.encoder, &ev, &self.memory, &mv, xv, None, Mode::Eval)?;
        let logits = class_logits_on_tape(&mut tape, &dv, g.v_hat)?;
        let probs = tape.softmax_rows(logits)?;
        Ok(tape.value(probs).clone())
    }

    /// Eval-mode class probabilities for one partial feature.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Tensor::matrix(1, x.len(), x.to_vec())?;
        Ok(self.predict_batch(&batch)?.into_data())
    }
}
