//! Pitch tracking, raw chroma accuracy and log-spectral distance.
//!
//! `cargo run --example metrics`

use speech2sing::eval::{lsd, rca, yin_f0, YinConfig};
use speech2sing::prep::{log_mag, pitch_shift};
use speech2sing::signal::{stft, StftConfig, Waveform};

fn tone(freq: f64) -> Waveform {
    Waveform::new(
        (0..16000)
            .map(|n| (0.5 * (2.0 * std::f64::consts::PI * freq * n as f64 / 16000.0).sin()) as f32)
            .collect(),
        16000,
    )
}

fn main() -> speech2sing::Result<()> {
    let yin = YinConfig::default();
    let cfg = StftConfig::default();
    let reference = tone(261.63);
    let ref_f0 = yin_f0(&reference, &yin);
    let ref_spec = log_mag(&stft(&reference, &cfg)?);

    for (name, w) in [
        ("same tone", reference.clone()),
        ("octave up", tone(523.25)),
        ("a fifth up", pitch_shift(&reference, 7.0)?),
        ("detuned 20 cents", tone(261.63 * 2f64.powf(20.0 / 1200.0))),
    ] {
        let est = yin_f0(&w, &yin).fit_to(ref_f0.len());
        let spec = log_mag(&stft(&w, &cfg)?);
        let frames = spec.n_frames.min(ref_spec.n_frames);
        let crop = |s: &speech2sing::prep::LogMagSpectrogram| speech2sing::prep::LogMagSpectrogram {
            n_bins: s.n_bins,
            n_frames: frames,
            values: (0..s.n_bins)
                .flat_map(|f| s.values[f * s.n_frames..f * s.n_frames + frames].to_vec())
                .collect(),
            frame_hop: s.frame_hop,
        };
        println!(
            "{name:<18} rca {:.3}  lsd {:>6.2} dB",
            rca(&ref_f0, &est)?,
            lsd(&crop(&ref_spec), &crop(&spec))?
        );
    }
    Ok(())
}
