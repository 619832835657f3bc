//! Waveform synthesis from predicted log-magnitude spectrograms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::StsModel;
use crate::prep::{align_to_contour, log_mag, rasterize_contour, LogMagSpectrogram, MelodyContour};
use crate::signal::{overlap_add, stft, stft_f64, ComplexSpectrogram, StftConfig, Waveform};

pub const DEFAULT_POWER: f64 = 1.2;
pub const DEFAULT_ITERS: usize = 60;

/// Linear magnitudes, row-major `F x T` like [`LogMagSpectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct Magnitudes {
    pub n_bins: usize,
    pub n_frames: usize,
    pub values: Vec<f64>,
}

impl Magnitudes {
    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.n_frames + t]
    }

    /// Magnitudes of a complex spectrogram.
    pub fn of(s: &ComplexSpectrogram) -> Self {
        let mut values = vec![0.0; s.n_bins * s.n_frames];
        for t in 0..s.n_frames {
            for (f, c) in s.frame(t).iter().enumerate() {
                values[f * s.n_frames + t] = c.norm();
            }
        }
        Magnitudes {
            n_bins: s.n_bins,
            n_frames: s.n_frames,
            values,
        }
    }
}

/// `exp(v) - 1` element-wise; negative inputs are clamped to zero first.
pub fn inv_log_mag(y: &LogMagSpectrogram) -> Magnitudes {
    Magnitudes {
        n_bins: y.n_bins,
        n_frames: y.n_frames,
        values: y.values.iter().map(|&v| (v.max(0.0) as f64).exp_m1()).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GriffinLimConfig {
    pub iters: usize,
    /// Exponent applied to the magnitudes before phase recovery.
    pub power: f64,
    pub seed: u64,
    pub stft: StftConfig,
}

impl Default for GriffinLimConfig {
    fn default() -> Self {
        GriffinLimConfig {
            iters: DEFAULT_ITERS,
            power: DEFAULT_POWER,
            seed: 0,
            stft: StftConfig::default(),
        }
    }
}

/// Waveform plus `‖|STFT(x_k)| - target‖` before each iteration and after the last.
#[derive(Debug, Clone, PartialEq)]
pub struct GriffinLimTrace {
    pub waveform: Waveform,
    pub errors: Vec<f64>,
}

fn projection_error(s: &ComplexSpectrogram, target: &[f64]) -> f64 {
    let n_frames = s.n_frames;
    let mut acc = 0.0;
    for t in 0..n_frames {
        for (f, c) in s.frame(t).iter().enumerate() {
            let d = c.norm() - target[f * n_frames + t];
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Iterative phase recovery with a seeded random initial phase.
///
/// Iterates in the padded signal domain, where every frame is a free
/// window, and trims half an FFT from each end at the end so the output
/// lines up with a centered analysis (`hop * (T - 1)` samples).
pub fn griffin_lim_traced(
    mag: &Magnitudes,
    cfg: &GriffinLimConfig,
    sample_rate: u32,
) -> Result<GriffinLimTrace> {
    cfg.stft.validate()?;
    if mag.n_bins != cfg.stft.n_bins() {
        return Err(Error::Shape(format!(
            "{} magnitude bins for a {}-point transform",
            mag.n_bins, cfg.stft.fft_size
        )));
    }
    if mag.n_frames == 0 {
        return Err(Error::Parameter("no frames to synthesise".into()));
    }
    if !(cfg.power > 0.0 && cfg.power.is_finite()) {
        return Err(Error::Parameter(format!("power {} must be positive", cfg.power)));
    }
    if mag.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("magnitudes must be finite and non-negative".into()));
    }
    let target: Vec<f64> = mag.values.iter().map(|v| v.powf(cfg.power)).collect();
    let (n_bins, n_frames) = (mag.n_bins, mag.n_frames);
    let frame_cfg = StftConfig {
        center: false,
        ..cfg.stft
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut spec = ComplexSpectrogram::zeros(n_bins, n_frames);
    for t in 0..n_frames {
        for (f, c) in spec.frame_mut(t).iter_mut().enumerate() {
            let phase = rng.gen_range(0.0..2.0 * PI);
            *c = Complex64::from_polar(target[f * n_frames + t], phase);
        }
    }
    let mut signal = overlap_add(&spec, &frame_cfg);
    let mut errors = Vec::with_capacity(cfg.iters + 1);
    for _ in 0..cfg.iters {
        let analysed = stft_f64(&signal, &frame_cfg);
        errors.push(projection_error(&analysed, &target));
        for t in 0..n_frames {
            let src = analysed.frame(t);
            for (f, c) in spec.frame_mut(t).iter_mut().enumerate() {
                let a = src[f];
                let norm = a.norm();
                let unit = if norm > 0.0 { a / norm } else { Complex64::new(1.0, 0.0) };
                *c = unit * target[f * n_frames + t];
            }
        }
        signal = overlap_add(&spec, &frame_cfg);
    }
    errors.push(projection_error(&stft_f64(&signal, &frame_cfg), &target));

    let pad = if cfg.stft.center { cfg.stft.fft_size / 2 } else { 0 };
    let len = if cfg.stft.center {
        cfg.stft.hop * (n_frames - 1)
    } else {
        signal.len()
    };
    let samples = (0..len)
        .map(|i| signal.get(pad + i).copied().unwrap_or(0.0) as f32)
        .collect();
    Ok(GriffinLimTrace {
        waveform: Waveform::new(samples, sample_rate),
        errors,
    })
}

pub fn griffin_lim(mag: &Magnitudes, cfg: &GriffinLimConfig, sample_rate: u32) -> Result<Waveform> {
    Ok(griffin_lim_traced(mag, cfg, sample_rate)?.waveform)
}

/// Network input for `speech` sung along `contour`.
pub fn prepare_input(
    speech: &Waveform,
    contour: &MelodyContour,
) -> Result<(LogMagSpectrogram, crate::prep::ContourImage)> {
    contour.validate()?;
    if contour.is_empty() {
        return Err(Error::Parameter("empty melody contour".into()));
    }
    let cfg = StftConfig::default();
    let aligned = align_to_contour(speech, contour)?;
    let x = log_mag(&stft(&aligned, &cfg)?);
    if x.n_frames != contour.len() {
        return Err(Error::Shape(format!(
            "aligned speech has {} frames for a {}-frame contour",
            x.n_frames,
            contour.len()
        )));
    }
    let c = rasterize_contour(contour, cfg.n_bins(), cfg.fft_size, speech.sample_rate)?;
    Ok((x, c))
}

/// Full inference chain from speech and a melody contour to sung audio.
pub fn predict(
    model: &StsModel,
    speech: &Waveform,
    contour: &MelodyContour,
    gl: &GriffinLimConfig,
) -> Result<Waveform> {
    let (x, c) = prepare_input(speech, contour)?;
    let c = model.flags().use_contour.then_some(&c);
    let y = model.predict_log_mag(&x, c)?;
    griffin_lim(&inv_log_mag(&y), gl, speech.sample_rate)
}
