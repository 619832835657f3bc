use super::{ContourImage, MelodyContour};
use crate::error::{Error, Result};
use crate::signal::ComplexSpectrogram;

/// `log(1 + |X|)` magnitudes, row-major `F x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMagSpectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    /// `values[f * n_frames + t]`
    pub values: Vec<f32>,
    pub frame_hop: f64,
}

impl LogMagSpectrogram {
    pub fn zeros(n_bins: usize, n_frames: usize) -> Self {
        LogMagSpectrogram {
            n_bins,
            n_frames,
            values: vec![0.0; n_bins * n_frames],
            frame_hop: super::contour::CONTOUR_HOP_SECS,
        }
    }

    pub fn get(&self, f: usize, t: usize) -> f32 {
        self.values[f * self.n_frames + t]
    }

    pub fn column(&self, t: usize) -> Vec<f32> {
        (0..self.n_bins).map(|f| self.get(f, t)).collect()
    }
}

pub fn log_mag(s: &ComplexSpectrogram) -> LogMagSpectrogram {
    let mut out = LogMagSpectrogram::zeros(s.n_bins, s.n_frames);
    for t in 0..s.n_frames {
        for (f, c) in s.frame(t).iter().enumerate() {
            out.values[f * s.n_frames + t] = c.norm().ln_1p() as f32;
        }
    }
    out
}

/// Marks the nearest FFT bin of each voiced frame; ties round up.
pub fn rasterize_contour(
    c: &MelodyContour,
    n_bins: usize,
    fft_size: usize,
    sample_rate: u32,
) -> Result<ContourImage> {
    let nyquist = sample_rate as f64 / 2.0;
    let bins = c
        .f0
        .iter()
        .enumerate()
        .map(|(t, &f0)| {
            if f0 <= 0.0 {
                return Ok(None);
            }
            if f0 as f64 >= nyquist {
                return Err(Error::Parameter(format!(
                    "frame {t}: f0 {f0} at or above Nyquist {nyquist}"
                )));
            }
            let bin = (f0 as f64 * fft_size as f64 / sample_rate as f64 + 0.5).floor() as usize;
            if bin >= n_bins {
                return Err(Error::Parameter(format!(
                    "frame {t}: bin {bin} beyond {n_bins} bins"
                )));
            }
            Ok(Some(bin))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContourImage { n_bins, bins })
}
