use std::f64::consts::PI;

use super::Waveform;

/// Zero crossings of the sinc kept on each side of the kernel center.
const HALF_ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;
const ROLLOFF: f64 = 0.96;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`. Equal rates return the input unchanged.
pub fn resample(w: &Waveform, target_rate: u32) -> Waveform {
    assert!(target_rate > 0, "target rate must be positive");
    if target_rate == w.sample_rate || w.is_empty() {
        return Waveform::new(w.samples.clone(), target_rate);
    }
    let ratio = target_rate as f64 / w.sample_rate as f64;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0) * ROLLOFF;
    // kernel half-width in input samples
    let half_width = HALF_ZERO_CROSSINGS / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);
    let x = &w.samples;
    let n_in = x.len() as isize;

    let samples = (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let lo = (t - half_width).ceil() as isize;
            let hi = (t + half_width).floor() as isize;
            let mut acc = 0.0f64;
            for k in lo.max(0)..=hi.min(n_in - 1) {
                let tau = t - k as f64;
                let r = tau / half_width;
                let win = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                acc += x[k as usize] as f64 * cutoff * sinc(cutoff * tau) * win;
            }
            acc as f32
        })
        .collect();
    Waveform::new(samples, target_rate)
}
