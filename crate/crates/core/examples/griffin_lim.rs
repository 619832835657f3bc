//! Recover a waveform from magnitudes alone and watch the spectral error fall.
//!
//! `cargo run --release --example griffin_lim`

use speech2sing::signal::{stft, StftConfig, Waveform};
use speech2sing::synth::{griffin_lim_traced, GriffinLimConfig, Magnitudes};

fn main() -> speech2sing::Result<()> {
    let w = Waveform::new(
        (0..16000)
            .map(|n| {
                let t = n as f64 / 16000.0;
                let f = if t < 0.5 { 330.0 } else { 440.0 };
                (0.5 * (2.0 * std::f64::consts::PI * f * t).sin()) as f32
            })
            .collect(),
        16000,
    );
    let cfg = GriffinLimConfig {
        iters: 60,
        ..GriffinLimConfig::default()
    };
    let mag = Magnitudes::of(&stft(&w, &StftConfig::default())?);
    let trace = griffin_lim_traced(&mag, &cfg, w.sample_rate)?;
    for (i, e) in trace.errors.iter().enumerate().step_by(10) {
        println!("iter {i:>3}: spectral error {e:.4}");
    }
    println!(
        "final error {:.4}, {} samples",
        trace.errors.last().unwrap(),
        trace.waveform.len()
    );
    Ok(())
}
