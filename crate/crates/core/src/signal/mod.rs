//! Audio I/O, resampling and STFT analysis/synthesis.

mod resample;
mod stft;
mod wav;

pub use resample::resample;
pub use stft::{istft, istft_with_length, stft, ComplexSpectrogram, StftConfig, Window};
pub(crate) use stft::{overlap_add, stft_f64};
pub use wav::{read_wav, write_wav};

/// Sample rate every internal stage runs at.
pub const INTERNAL_RATE: u32 = 16_000;

/// Mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Waveform::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Copy of `[start, end)`, clamped to the signal.
    pub fn slice(&self, start: usize, end: usize) -> Waveform {
        let end = end.min(self.len());
        let start = start.min(end);
        Waveform::new(self.samples[start..end].to_vec(), self.sample_rate)
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }
}
