//! Input preparation: silence removal, phase-vocoder stretching, pitch
//! shifting, log-magnitude features and melody rasterization.

mod contour;
mod features;
mod silence;
mod vocoder;

pub use contour::{read_contour, write_contour, ContourImage, MelodyContour, F0_MAX, F0_MIN};
pub use features::{log_mag, rasterize_contour, LogMagSpectrogram};
pub use silence::{remove_silent_frames, silent_frame_mask, SILENCE_THRESHOLD_DB};
pub use vocoder::{
    pitch_shift, stretch_by_map, stretch_to_contour, stretch_to_length, time_stretch, MAX_RATE,
    MIN_RATE,
};

use crate::error::Result;
use crate::signal::{StftConfig, Waveform};

/// Removes silent frames, falling back to the untrimmed speech when less than
/// one FFT frame would remain, then stretches uniformly onto the contour grid.
pub fn align_to_contour(speech: &Waveform, contour: &MelodyContour) -> Result<Waveform> {
    let fft = StftConfig::default().fft_size;
    let trimmed = match remove_silent_frames(speech) {
        Ok(w) if w.len() >= fft => w,
        _ => speech.clone(),
    };
    stretch_to_contour(&trimmed, contour)
}
