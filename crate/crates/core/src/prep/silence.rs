use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const SILENCE_THRESHOLD_DB: f64 = -40.0;
const FRAME: usize = 1024;
const HOP: usize = 256;
const MIN_RUN: usize = 3;

fn frame_energies(x: &[f32]) -> Vec<f64> {
    let n_frames = 1 + (x.len() - FRAME) / HOP;
    (0..n_frames)
        .map(|i| {
            x[i * HOP..i * HOP + FRAME]
                .iter()
                .map(|&s| (s as f64) * (s as f64))
                .sum()
        })
        .collect()
}

/// Per-frame silence flags (1024-sample frames, 256 hop) relative to the loudest frame.
pub fn silent_frame_mask(w: &Waveform) -> Result<Vec<bool>> {
    if w.len() < FRAME {
        return Err(Error::Parameter(format!(
            "need at least {FRAME} samples for silence detection, got {}",
            w.len()
        )));
    }
    let energies = frame_energies(&w.samples);
    let max = energies.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::EmptyOutput);
    }
    let floor = max * 10f64.powf(SILENCE_THRESHOLD_DB / 10.0);
    Ok(energies.iter().map(|&e| e <= floor).collect())
}

/// Deletes every run of three or more consecutive silent frames.
///
/// A removed run of frames `i..=j` excises samples `[i * hop, (j + 1) * hop)`.
pub fn remove_silent_frames(w: &Waveform) -> Result<Waveform> {
    let silent = silent_frame_mask(w)?;
    let mut keep = vec![true; w.len()];
    let mut i = 0;
    while i < silent.len() {
        if !silent[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < silent.len() && silent[i] {
            i += 1;
        }
        if i - start >= MIN_RUN {
            for k in keep[start * HOP..i * HOP].iter_mut() {
                *k = false;
            }
        }
    }
    let samples = w
        .samples
        .iter()
        .zip(&keep)
        .filter_map(|(&s, &k)| k.then_some(s))
        .collect();
    Ok(Waveform::new(samples, w.sample_rate))
}
