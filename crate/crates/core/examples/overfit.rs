//! Train a small model on four toy samples until it reproduces their melodies.
//!
//! `cargo run --release --example overfit [iterations]`

use speech2sing::data::toy::toy_samples;
use speech2sing::eval::{rca, yin_f0, YinConfig};
use speech2sing::model::{ModelConfig, StsModel, Variant};
use speech2sing::synth::{predict, GriffinLimConfig};
use speech2sing::train::{TrainConfig, Trainer};

fn main() -> speech2sing::Result<()> {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let samples = toy_samples(0);
    let variant = Variant::PMtl;
    let mut model = StsModel::new(ModelConfig::toy(variant).with_seed(1))?;
    let cfg = TrainConfig {
        augment: false,
        batch: samples.len(),
        seed: 1,
        ..TrainConfig::for_variant(variant)
    };
    let mut trainer = Trainer::new(&mut model, &samples, cfg)?;
    for i in 0..iters {
        let r = trainer.step(0)?;
        if i % 50 == 0 || i + 1 == iters {
            println!("iter {i:>4}: total {:.5} mse {:.5} ce {:.4}", r.total, r.mse, r.ce);
        }
    }
    let gl = GriffinLimConfig::default();
    for s in &samples {
        let sung = predict(trainer.model(), &s.speech, &s.contour, &gl)?;
        let acc = rca(&s.contour, &yin_f0(&sung, &YinConfig::default()))?;
        println!("{}: rca {acc:.3}", s.id);
    }
    Ok(())
}
