use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann, COLA at hop = len/4.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub window_len: usize,
    pub hop: usize,
    pub window: Window,
    pub center: bool,
}

impl Default for StftConfig {
    /// 1024-point FFT, 64 ms Hann window, 16 ms hop at 16 kHz.
    fn default() -> Self {
        StftConfig {
            fft_size: 1024,
            window_len: 1024,
            hop: 256,
            window: Window::Hann,
            center: true,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.window_len == 0 || self.fft_size == 0 {
            return Err(Error::Parameter("stft sizes must be positive".into()));
        }
        if self.window_len > self.fft_size {
            return Err(Error::Parameter(format!(
                "window {} longer than fft {}",
                self.window_len, self.fft_size
            )));
        }
        if self.window_len % self.hop != 0 {
            return Err(Error::Parameter(format!(
                "hop {} does not divide window {}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }

    /// Number of frames `stft` produces for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.center {
            1 + len / self.hop
        } else if len <= self.fft_size {
            1
        } else {
            1 + (len - self.fft_size) / self.hop
        }
    }

    /// Analysis window zero-padded (centered) to the FFT length.
    fn padded_window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.fft_size];
        let off = (self.fft_size - self.window_len) / 2;
        for (i, c) in self.window.coefficients(self.window_len).into_iter().enumerate() {
            w[off + i] = c;
        }
        w
    }
}

/// Half-spectrum STFT, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub n_bins: usize,
    pub n_frames: usize,
    /// `data[t * n_bins + f]`
    pub data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(n_bins: usize, n_frames: usize) -> Self {
        ComplexSpectrogram {
            n_bins,
            n_frames,
            data: vec![Complex64::new(0.0, 0.0); n_bins * n_frames],
        }
    }

    pub fn get(&self, f: usize, t: usize) -> Complex64 {
        self.data[t * self.n_bins + f]
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex64] {
        &mut self.data[t * self.n_bins..(t + 1) * self.n_bins]
    }

    /// Magnitudes, frame-major like `data`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }
}

/// Index into `0..len` reflecting at both ends without repeating the edge sample.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

pub(crate) fn padded_signal(samples: &[f64], cfg: &StftConfig) -> Vec<f64> {
    if !cfg.center {
        let mut v = samples.to_vec();
        if v.len() < cfg.fft_size {
            v.resize(cfg.fft_size, 0.0);
        }
        return v;
    }
    let pad = cfg.fft_size / 2;
    let n = samples.len();
    (0..n + 2 * pad)
        .map(|i| {
            let j = i as isize - pad as isize;
            if n == 0 {
                0.0
            } else {
                samples[reflect_index(j, n)]
            }
        })
        .collect()
}

pub(crate) fn stft_f64(samples: &[f64], cfg: &StftConfig) -> ComplexSpectrogram {
    let n_fft = cfg.fft_size;
    let n_bins = cfg.n_bins();
    let n_frames = cfg.frame_count(samples.len());
    let padded = padded_signal(samples, cfg);
    let window = cfg.padded_window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut out = ComplexSpectrogram::zeros(n_bins, n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            let x = padded.get(start + i).copied().unwrap_or(0.0);
            *b = Complex64::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        out.frame_mut(t).copy_from_slice(&buf[..n_bins]);
    }
    out
}

/// Overlap-add synthesis over the full padded extent `fft_size + hop * (T - 1)`.
pub(crate) fn overlap_add(s: &ComplexSpectrogram, cfg: &StftConfig) -> Vec<f64> {
    let n_fft = cfg.fft_size;
    let n_bins = cfg.n_bins();
    assert_eq!(s.n_bins, n_bins, "spectrogram bins do not match config");
    if s.n_frames == 0 {
        return Vec::new();
    }
    let total = n_fft + cfg.hop * (s.n_frames - 1);
    let window = cfg.padded_window();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_fft);
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..s.n_frames {
        let frame = s.frame(t);
        buf[..n_bins].copy_from_slice(frame);
        for k in n_bins..n_fft {
            buf[k] = frame[n_fft - k].conj();
        }
        // a real signal has real DC and Nyquist bins
        buf[0].im = 0.0;
        if n_fft % 2 == 0 {
            buf[n_fft / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for i in 0..n_fft {
            let w = window[i];
            out[start + i] += buf[i].re / n_fft as f64 * w;
            norm[start + i] += w * w;
        }
    }
    let floor = 1e-10;
    for (o, n) in out.iter_mut().zip(&norm) {
        if *n > floor {
            *o /= n;
        }
    }
    out
}

fn to_f64(w: &Waveform) -> Vec<f64> {
    w.samples.iter().map(|&s| s as f64).collect()
}

/// Short-time Fourier transform; frame `t` is centered on sample `t * hop` when centering.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    cfg.validate()?;
    if w.is_empty() {
        return Err(Error::Parameter("cannot analyse an empty waveform".into()));
    }
    Ok(stft_f64(&to_f64(w), cfg))
}

/// Inverse STFT by windowed overlap-add with window-square normalization.
///
/// With centering the output covers `hop * (T - 1)` samples aligned with the
/// analysed signal; without it the full `window + hop * (T - 1)` extent.
pub fn istft(s: &ComplexSpectrogram, cfg: &StftConfig, sample_rate: u32) -> Result<Waveform> {
    cfg.validate()?;
    check_bins(s, cfg)?;
    let full = overlap_add(s, cfg);
    let samples = if cfg.center {
        let pad = cfg.fft_size / 2;
        let len = cfg.hop * s.n_frames.saturating_sub(1);
        full[pad.min(full.len())..(pad + len).min(full.len())].to_vec()
    } else {
        full
    };
    Ok(Waveform::new(
        samples.into_iter().map(|x| x as f32).collect(),
        sample_rate,
    ))
}

/// `istft` trimmed or zero-extended to exactly `len` samples.
pub fn istft_with_length(
    s: &ComplexSpectrogram,
    cfg: &StftConfig,
    sample_rate: u32,
    len: usize,
) -> Result<Waveform> {
    cfg.validate()?;
    check_bins(s, cfg)?;
    let full = overlap_add(s, cfg);
    let off = if cfg.center { cfg.fft_size / 2 } else { 0 };
    let samples = (0..len)
        .map(|i| full.get(off + i).copied().unwrap_or(0.0) as f32)
        .collect();
    Ok(Waveform::new(samples, sample_rate))
}

fn check_bins(s: &ComplexSpectrogram, cfg: &StftConfig) -> Result<()> {
    if s.n_bins != cfg.n_bins() {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, config expects {}",
            s.n_bins,
            cfg.n_bins()
        )));
    }
    Ok(())
}
