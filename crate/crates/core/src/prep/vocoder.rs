use std::f64::consts::PI;

use num_complex::Complex64;

use super::MelodyContour;
use crate::error::{Error, Result};
use crate::signal::{self, resample, ComplexSpectrogram, StftConfig, Waveform};

pub const MIN_RATE: f64 = 0.1;
pub const MAX_RATE: f64 = 10.0;

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Local magnitude maxima over a +-2 bin neighbourhood.
fn spectral_peaks(mag: &[f64]) -> Vec<usize> {
    let n = mag.len();
    (0..n)
        .filter(|&k| {
            mag[k] > 0.0
                && (k.saturating_sub(2)..(k + 3).min(n)).all(|j| j == k || mag[k] > mag[j] || (mag[k] == mag[j] && k < j))
        })
        .collect()
}

/// Phase-vocoder resynthesis reading the analysis at fractional frame `positions`.
///
/// Magnitudes are linearly interpolated between neighbouring frames. Peak
/// bins advance by their instantaneous frequency over one hop; every other
/// bin keeps its analysis phase offset from the nearest peak (identity phase
/// locking), which preserves the shape of each partial across frames.
fn vocode(spec: &ComplexSpectrogram, cfg: &StftConfig, positions: &[f64]) -> ComplexSpectrogram {
    let n_bins = spec.n_bins;
    let zero = Complex64::new(0.0, 0.0);
    let column = |t: usize, f: usize| -> Complex64 {
        if t < spec.n_frames {
            spec.get(f, t)
        } else {
            zero
        }
    };
    let advance: Vec<f64> = (0..n_bins)
        .map(|f| 2.0 * PI * cfg.hop as f64 * f as f64 / cfg.fft_size as f64)
        .collect();
    let first = positions.first().map_or(0, |p| p.floor().max(0.0) as usize);
    let mut phase: Vec<f64> = (0..n_bins).map(|f| column(first, f).arg()).collect();
    let mut out = ComplexSpectrogram::zeros(n_bins, positions.len());
    let mut mag = vec![0.0; n_bins];
    let mut locked = vec![0.0; n_bins];
    for (t, &pos) in positions.iter().enumerate() {
        let pos = pos.max(0.0);
        let i = pos.floor() as usize;
        let alpha = pos - i as f64;
        let nearest = if alpha < 0.5 { i } else { i + 1 };
        for (f, m) in mag.iter_mut().enumerate() {
            *m = (1.0 - alpha) * column(i, f).norm() + alpha * column(i + 1, f).norm();
        }
        let peaks = spectral_peaks(&mag);
        if peaks.is_empty() {
            locked.copy_from_slice(&phase);
        } else {
            let mut owner = 0;
            for (f, l) in locked.iter_mut().enumerate() {
                while owner + 1 < peaks.len() && peaks[owner + 1].abs_diff(f) < peaks[owner].abs_diff(f) {
                    owner += 1;
                }
                let p = peaks[owner];
                *l = if f == p {
                    phase[p]
                } else {
                    phase[p] + column(nearest, f).arg() - column(nearest, p).arg()
                };
            }
        }
        let frame = out.frame_mut(t);
        for f in 0..n_bins {
            frame[f] = Complex64::from_polar(mag[f], locked[f]);
            let (c0, c1) = (column(i, f), column(i + 1, f));
            let dphase = wrap_phase(c1.arg() - c0.arg() - advance[f]);
            phase[f] = locked[f] + advance[f] + dphase;
        }
    }
    out
}

/// Time-scales `w` by reading input frame `map(t_out)` for each output frame.
///
/// `map` takes and returns frame indices on the 256-sample hop grid; the
/// result is cut to exactly `out_len` samples.
pub fn stretch_by_map(
    w: &Waveform,
    out_len: usize,
    map: impl Fn(f64) -> f64,
) -> Result<Waveform> {
    let cfg = StftConfig::default();
    if w.is_empty() {
        return Err(Error::Parameter("cannot stretch an empty waveform".into()));
    }
    let spec = signal::stft(w, &cfg)?;
    let n_out = cfg.frame_count(out_len);
    let last = (spec.n_frames - 1) as f64;
    let positions: Vec<f64> = (0..n_out).map(|t| map(t as f64).clamp(0.0, last)).collect();
    let out = vocode(&spec, &cfg, &positions);
    signal::istft_with_length(&out, &cfg, w.sample_rate, out_len)
}

/// Uniform stretch of `w` to exactly `out_len` samples.
pub fn stretch_to_length(w: &Waveform, out_len: usize) -> Result<Waveform> {
    if out_len == 0 {
        return Err(Error::Parameter("target length must be positive".into()));
    }
    let rate = w.len() as f64 / out_len as f64;
    check_rate(rate)?;
    stretch_by_map(w, out_len, |t| t * rate)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(MIN_RATE..=MAX_RATE).contains(&rate) || !rate.is_finite() {
        return Err(Error::Parameter(format!(
            "stretch rate {rate:.4} outside [{MIN_RATE}, {MAX_RATE}]"
        )));
    }
    Ok(())
}

/// Phase-vocoder time stretch; `rate > 1` shortens, pitch is preserved.
pub fn time_stretch(w: &Waveform, rate: f64) -> Result<Waveform> {
    check_rate(rate)?;
    let out_len = (w.len() as f64 / rate).round() as usize;
    if out_len == 0 {
        return Err(Error::Parameter("stretched signal would be empty".into()));
    }
    stretch_by_map(w, out_len, |t| t * rate)
}

/// Uniformly stretches `w` so its STFT has exactly one frame per contour frame.
pub fn stretch_to_contour(w: &Waveform, c: &MelodyContour) -> Result<Waveform> {
    let cfg = StftConfig::default();
    if c.is_empty() {
        return Err(Error::Parameter("empty melody contour".into()));
    }
    if cfg.frame_count(w.len()) == c.len() {
        return Ok(w.clone());
    }
    let out_len = ((c.len() - 1) * cfg.hop).max(1);
    stretch_to_length(w, out_len)
}

/// Shifts pitch by `semitones` keeping duration: resample by 2^(-s/12), then stretch back.
pub fn pitch_shift(w: &Waveform, semitones: f64) -> Result<Waveform> {
    if semitones.abs() > 12.0 {
        return Err(Error::Parameter(format!(
            "pitch shift {semitones} exceeds one octave"
        )));
    }
    if semitones == 0.0 || w.is_empty() {
        return Ok(w.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let rate = w.sample_rate;
    let squeezed_rate = ((rate as f64) / ratio).round() as u32;
    let mut squeezed = resample(w, squeezed_rate);
    squeezed.sample_rate = rate;
    if squeezed.is_empty() {
        return Err(Error::Parameter("signal too short to pitch shift".into()));
    }
    let mut out = stretch_to_length(&squeezed, w.len())?;
    out.sample_rate = rate;
    Ok(out)
}
