//! Stretch each spoken phone to the duration it is sung with.
//!
//! `cargo run --example phsync`

use speech2sing::data::{phsync_stretch, PhoneAnnotation, PhoneInterval, PhonemeDict};
use speech2sing::signal::Waveform;

fn main() -> speech2sing::Result<()> {
    let rate = 16000.0;
    let iv = |start: f64, end: f64, phone: usize| PhoneInterval { start, end, phone };
    let sil = PhonemeDict::SIL;
    let dict = PhonemeDict::new();
    let (aa, iy) = (dict.index("aa").unwrap(), dict.index("iy").unwrap());

    let speech_ann = PhoneAnnotation::new(vec![
        iv(0.0, 0.2, sil),
        iv(0.2, 0.45, aa),
        iv(0.45, 0.8, iy),
        iv(0.8, 0.9, sil),
    ])?;
    let sing_ann = PhoneAnnotation::new(vec![
        iv(0.0, 0.1, sil),
        iv(0.1, 0.6, aa),
        iv(0.6, 0.8, iy),
        iv(0.8, 1.0, sil),
    ])?;
    let samples = (0..(0.9 * rate) as usize)
        .map(|n| {
            let t = n as f64 / rate;
            let f = if t < 0.45 { 300.0 } else { 700.0 };
            let on = (0.2..0.8).contains(&t);
            if on {
                (0.4 * (2.0 * std::f64::consts::PI * f * t).sin()) as f32
            } else {
                0.0
            }
        })
        .collect();
    let speech = Waveform::new(samples, rate as u32);
    let sung = phsync_stretch(&speech, &speech_ann, &sing_ann)?;
    println!(
        "speech {:.2} s -> {:.2} s following the sung phone timing",
        speech.duration_secs(),
        sung.duration_secs()
    );
    for p in sing_ann.spoken() {
        let window = sung.slice((p.start * rate) as usize, (p.end * rate) as usize);
        let rms = (window.samples.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / window.len() as f64).sqrt();
        println!("  {:<3} {:.2}-{:.2} s, rms {rms:.3}", dict.name(p.phone).unwrap(), p.start, p.end);
    }
    Ok(())
}
