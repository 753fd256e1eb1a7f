//! Short reference runs of each player against a frozen opponent.

use amemnet::data::{build_triplets, generate_synthetic, SynthConfig};
use amemnet::discriminator::DiscriminatorParams;
use amemnet::memory::{Similarity, WriteMode};
use amemnet::model::{Model, ModelConfig};
use amemnet::training::{Batch, LossWeights, TrainConfig, Trainer};

fn config(d: usize) -> ModelConfig {
    ModelConfig {
        d,
        hidden: 12,
        h: 8,
        slots: 16,
        classes: 4,
        similarity: Similarity::Dot,
        write_mode: WriteMode::BatchMean,
    }
}

fn data(d: usize) -> Vec<amemnet::data::FeatureTriplet> {
    let cfg = SynthConfig {
        d,
        classes: 4,
        train_per_class: 20,
        test_per_class: 0,
        ..SynthConfig::default()
    };
    let (rgb, _) = generate_synthetic(&cfg).unwrap();
    build_triplets(&rgb, &rgb.train_ids).unwrap()
}

#[test]
fn discriminator_separates_a_bad_generator() {
    let d = 16;
    // Partial features shifted far from the full ones, so generated
    // features x + alpha M stay linearly separable from real ones.
    let triplets: Vec<_> = data(d)
        .into_iter()
        .map(|mut t| {
            t.x.iter_mut().for_each(|x| *x += 4.0);
            t
        })
        .collect();
    let mut model = Model::init(config(d), 1).unwrap();
    let frozen_generator = model.generator_tensors().into_iter().cloned().collect::<Vec<_>>();
    let cfg = TrainConfig {
        batch: 32,
        lr_d: 1e-2,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&model, cfg).unwrap();
    let mut last = None;
    for s in 0..200 {
        let start = (s * 32) % (triplets.len() - 32);
        let batch = Batch::from_triplets(&triplets[start..start + 32]).unwrap();
        last = Some(trainer.discriminator_step(&mut model, &batch).unwrap());
    }
    let m = last.unwrap();
    assert!(m.d_real_acc > 0.95 && m.d_fake_acc > 0.95, "{m:?}");
    // Only the write touched the generator side.
    let now = model.generator_tensors();
    for (i, (a, b)) in frozen_generator.iter().zip(now).enumerate() {
        if i != 6 {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn generator_reduces_reconstruction_against_a_flat_critic() {
    let d = 16;
    let triplets = data(d);
    let mut model = Model::init(config(d), 2).unwrap();
    model.discriminator = DiscriminatorParams::zeros(d, 4);
    let cfg = TrainConfig {
        batch: 32,
        weights: LossWeights {
            lambda_cls: 0.0,
            lambda_rec: 1.0,
        },
        // At the default 1e-4 the memory writes dominate over 500 steps and
        // L_rec first rises (13.8 -> 25.5 -> 16.6 in 50-step windows).
        lr_g: 1e-2,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&model, cfg).unwrap();
    let batch = Batch::from_triplets(&triplets[..32]).unwrap();
    let losses: Vec<f64> = (0..500)
        .map(|_| trainer.generator_step(&mut model, &batch).unwrap().l_rec)
        .collect();
    let tail = losses[450..].iter().sum::<f64>() / 50.0;
    assert!(tail <= 0.5 * losses[0], "start {} tail {tail}", losses[0]);
    let windows: Vec<f64> = losses.chunks(50).map(|c| c.iter().sum::<f64>() / 50.0).collect();
    assert!(windows.windows(2).all(|w| w[1] <= w[0]), "{windows:?}");
    assert!(model.discriminator == DiscriminatorParams::zeros(d, 4));
}
