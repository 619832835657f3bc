//! Deterministic YIN pitch tracker on the STFT frame grid.

use crate::prep::{MelodyContour, F0_MAX, F0_MIN};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub threshold: f64,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        YinConfig {
            frame_len: 1024,
            hop: 256,
            threshold: 0.1,
            fmin: F0_MIN as f64,
            fmax: F0_MAX as f64,
        }
    }
}

/// Frame energies below this are treated as silence.
const ENERGY_FLOOR: f64 = 1e-8;

/// Cumulative-mean-normalized difference function for lags `0..=max_lag`.
fn cmnd(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let n = frame.len() - max_lag;
    let mut out = vec![1.0; max_lag + 1];
    let mut running = 0.0;
    for tau in 1..=max_lag {
        let d: f64 = (0..n)
            .map(|j| {
                let diff = frame[j] - frame[j + tau];
                diff * diff
            })
            .sum();
        running += d;
        out[tau] = if running > 0.0 {
            d * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

/// Period estimate in (fractional) samples, or `None` when unvoiced.
fn estimate_period(frame: &[f64], min_lag: usize, max_lag: usize, threshold: f64) -> Option<f64> {
    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy < ENERGY_FLOOR {
        return None;
    }
    let d = cmnd(frame, max_lag);
    let mut tau = min_lag.max(2);
    while tau < max_lag {
        if d[tau] < threshold {
            while tau + 1 < max_lag && d[tau + 1] < d[tau] {
                tau += 1;
            }
            break;
        }
        tau += 1;
    }
    if tau >= max_lag || d[tau] >= threshold {
        return None;
    }
    let (a, b, c) = (d[tau - 1], d[tau], d[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Some(tau as f64 + shift)
}

/// Per-frame f0; frame `t` is centered on sample `t * hop` like the STFT.
pub fn yin_f0(w: &Waveform, cfg: &YinConfig) -> MelodyContour {
    let sr = w.sample_rate as f64;
    let max_lag = ((sr / cfg.fmin).floor() as usize).min(cfg.frame_len / 2);
    let min_lag = (sr / cfg.fmax).floor() as usize;
    let n_frames = 1 + w.len() / cfg.hop;
    let half = cfg.frame_len as isize / 2;
    let mut frame = vec![0.0f64; cfg.frame_len];
    let f0 = (0..n_frames)
        .map(|t| {
            let start = (t * cfg.hop) as isize - half;
            for (i, v) in frame.iter_mut().enumerate() {
                let k = start + i as isize;
                *v = if k >= 0 && (k as usize) < w.len() {
                    w.samples[k as usize] as f64
                } else {
                    0.0
                };
            }
            match estimate_period(&frame, min_lag, max_lag, cfg.threshold) {
                Some(p) => {
                    let hz = sr / p;
                    if hz >= cfg.fmin && hz <= cfg.fmax {
                        hz as f32
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            }
        })
        .collect();
    MelodyContour::new(f0)
}
