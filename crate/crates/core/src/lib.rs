//! Speech-to-singing conversion.
//!
//! Spoken audio plus a target melody contour goes through silence removal,
//! a uniform phase-vocoder stretch and a log-magnitude STFT; a pair of
//! encoders and a skip-connected decoder predict the sung log-magnitude
//! spectrogram, which Griffin-Lim turns back into audio. Training uses an
//! MSE objective optionally combined with frame-level phoneme cross-entropy.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod prep;
pub mod signal;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
