//! Time-stretch and pitch-shift a harmonic tone with the phase vocoder.
//!
//! `cargo run --example vocoder [out_dir]` writes the results as wav files.

use std::path::PathBuf;

use speech2sing::eval::{yin_f0, YinConfig};
use speech2sing::prep::{pitch_shift, time_stretch};
use speech2sing::signal::{write_wav, Waveform};

fn median_f0(w: &Waveform) -> f64 {
    let c = yin_f0(w, &YinConfig::default());
    let mut v: Vec<f32> = c.f0.into_iter().filter(|f| *f > 0.0).collect();
    v.sort_by(f32::total_cmp);
    v[v.len() / 2] as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "vocoder_out".into()));
    std::fs::create_dir_all(&out)?;
    let tone = Waveform::new(
        (0..16000)
            .map(|n| {
                let t = n as f64 / 16000.0;
                let phase = 2.0 * std::f64::consts::PI * 220.0 * t;
                (0.4 * phase.sin() + 0.1 * (2.0 * phase).sin()) as f32
            })
            .collect(),
        16000,
    );
    println!("input: {:.2} s at {:.1} Hz", tone.duration_secs(), median_f0(&tone));

    for rate in [0.5, 1.5] {
        let w = time_stretch(&tone, rate)?;
        println!("stretch x{rate}: {:.3} s at {:.1} Hz", w.duration_secs(), median_f0(&w));
        write_wav(&w, out.join(format!("stretch_{rate}.wav")))?;
    }
    for semis in [-5.0, 7.0] {
        let w = pitch_shift(&tone, semis)?;
        println!("shift {semis:+} st: {:.3} s at {:.1} Hz", w.duration_secs(), median_f0(&w));
        write_wav(&w, out.join(format!("shift_{semis}.wav")))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
