//! Analyse a chirp with the short-time Fourier transform and resynthesise it.
//!
//! `cargo run --example stft_roundtrip`

use speech2sing::signal::{istft_with_length, resample, stft, StftConfig, Waveform};

fn main() -> speech2sing::Result<()> {
    let rate = 16000;
    let chirp: Vec<f32> = (0..rate)
        .map(|n| {
            let t = n as f64 / rate as f64;
            (0.5 * (2.0 * std::f64::consts::PI * (200.0 * t + 300.0 * t * t)).sin()) as f32
        })
        .collect();
    let w = Waveform::new(chirp, rate as u32);
    let cfg = StftConfig::default();
    let spec = stft(&w, &cfg)?;
    println!("{} samples -> {} bins x {} frames", w.len(), spec.n_bins, spec.n_frames);

    let back = istft_with_length(&spec, &cfg, w.sample_rate, w.len())?;
    let err: f64 = w
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| ((a - b) as f64).powi(2))
        .sum();
    let energy: f64 = w.samples.iter().map(|a| (*a as f64).powi(2)).sum();
    println!("reconstruction SNR {:.1} dB", 10.0 * (energy / err.max(1e-300)).log10());

    let cd = resample(&w, 44100);
    println!("resampled to 44.1 kHz: {} samples", cd.len());
    Ok(())
}
