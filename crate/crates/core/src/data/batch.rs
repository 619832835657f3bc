use super::samples::TrainSample;
use crate::error::{Error, Result};
use crate::prep::{
    align_to_contour, log_mag, pitch_shift, rasterize_contour, stretch_to_contour, ContourImage,
    LogMagSpectrogram,
};
use crate::signal::{stft, StftConfig};
use crate::tensor::Tensor;

use super::phsync::phsync_stretch;

/// How the speech is brought to the singing duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Silence removal then one uniform stretch.
    #[default]
    Uniform,
    /// Per-phone stretch from the annotations.
    PhSync,
}

/// Network-ready features of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureItem {
    pub x: LogMagSpectrogram,
    pub c: ContourImage,
    pub y: LogMagSpectrogram,
    pub phones: Vec<usize>,
}

impl FeatureItem {
    pub fn n_frames(&self) -> usize {
        self.y.n_frames
    }

    /// Shifts the speech by `shift` semitones (zero for none), aligns it to
    /// the singing and computes input, contour raster and target.
    pub fn from_sample(sample: &TrainSample, alignment: Alignment, shift: f64) -> Result<Self> {
        let cfg = StftConfig::default();
        let speech = if shift != 0.0 {
            pitch_shift(&sample.speech, shift)?
        } else {
            sample.speech.clone()
        };
        let y = log_mag(&stft(&sample.singing, &cfg)?);
        let contour = sample.contour.fit_to(y.n_frames);
        let aligned = match alignment {
            Alignment::Uniform => align_to_contour(&speech, &contour)?,
            Alignment::PhSync => {
                let w = phsync_stretch(&speech, &sample.speech_ann, &sample.sing_ann)?;
                stretch_to_contour(&w, &contour)?
            }
        };
        let x = log_mag(&stft(&aligned, &cfg)?);
        if x.n_frames != y.n_frames {
            return Err(Error::Shape(format!(
                "aligned speech has {} frames, singing {}",
                x.n_frames, y.n_frames
            )));
        }
        let c = rasterize_contour(&contour, cfg.n_bins(), cfg.fft_size, sample.singing.sample_rate)?;
        let mut phones = sample.frame_phones.clone();
        phones.resize(y.n_frames, super::dict::PhonemeDict::SIL);
        Ok(FeatureItem { x, c, y, phones })
    }
}

/// Zero-padded `[B, F, T]` tensors with a frame mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Tensor<f32>,
    pub c: Tensor<f32>,
    pub y: Tensor<f32>,
    /// `[B * T]`, 1 on real frames.
    pub mask: Vec<f32>,
    /// `[B * T]` phone targets; padding frames hold silence.
    pub phones: Vec<usize>,
    pub lengths: Vec<usize>,
    pub frames: usize,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.lengths.len()
    }
}

/// Pads to the longest item rounded up to a multiple of 8. Items longer than
/// `max_frames` are cropped.
pub fn make_batch(items: &[FeatureItem], max_frames: Option<usize>) -> Result<Batch> {
    make_batch_padded(items, max_frames, 0)
}

/// As [`make_batch`] with at least `min_frames` padded frames.
pub fn make_batch_padded(
    items: &[FeatureItem],
    max_frames: Option<usize>,
    min_frames: usize,
) -> Result<Batch> {
    let first = items
        .first()
        .ok_or_else(|| Error::Parameter("empty batch".into()))?;
    let f = first.y.n_bins;
    let lengths: Vec<usize> = items
        .iter()
        .map(|it| max_frames.map_or(it.n_frames(), |m| it.n_frames().min(m)))
        .collect();
    let longest = *lengths.iter().max().unwrap_or(&0);
    let frames = (longest.div_ceil(8) * 8).max(min_frames.div_ceil(8) * 8).max(8);
    let b = items.len();
    let mut x = vec![0.0f32; b * f * frames];
    let mut c = vec![0.0f32; b * f * frames];
    let mut y = vec![0.0f32; b * f * frames];
    let mut mask = vec![0.0f32; b * frames];
    let mut phones = vec![super::dict::PhonemeDict::SIL; b * frames];
    for (bi, (it, &len)) in items.iter().zip(&lengths).enumerate() {
        if it.x.n_bins != f || it.y.n_bins != f || it.c.n_bins != f {
            return Err(Error::Shape("items disagree on bin count".into()));
        }
        let t_src = it.n_frames();
        let dense = it.c.to_dense();
        for row in 0..f {
            let dst = (bi * f + row) * frames;
            let src = row * t_src;
            x[dst..dst + len].copy_from_slice(&it.x.values[src..src + len]);
            y[dst..dst + len].copy_from_slice(&it.y.values[src..src + len]);
            c[dst..dst + len].copy_from_slice(&dense[src..src + len]);
        }
        mask[bi * frames..bi * frames + len].fill(1.0);
        phones[bi * frames..bi * frames + len].copy_from_slice(&it.phones[..len]);
    }
    let shape = [b, f, frames];
    Ok(Batch {
        x: Tensor::new(&shape, x)?,
        c: Tensor::new(&shape, c)?,
        y: Tensor::new(&shape, y)?,
        mask,
        phones,
        lengths,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(frames: usize) -> FeatureItem {
        let lm = |v: f32| LogMagSpectrogram {
            n_bins: 4,
            n_frames: frames,
            values: vec![v; 4 * frames],
            frame_hop: 0.016,
        };
        FeatureItem {
            x: lm(1.0),
            c: ContourImage {
                n_bins: 4,
                bins: vec![Some(2); frames],
            },
            y: lm(2.0),
            phones: vec![3; frames],
        }
    }

    #[test]
    fn pads_to_longest_aligned() {
        let b = make_batch(&[item(100), item(120)], None).unwrap();
        assert_eq!(b.frames, 120);
        assert_eq!(b.x.shape(), &[2, 4, 120]);
        let sums: Vec<f32> = b.mask.chunks(120).map(|m| m.iter().sum()).collect();
        assert_eq!(sums, vec![100.0, 120.0]);
        assert_eq!(b.phones[99], 3);
        assert_eq!(b.phones[100], super::super::dict::PhonemeDict::SIL);
        // padded region is zero
        assert_eq!(b.y.data()[110], 0.0);
        assert_eq!(b.y.data()[99], 2.0);
        assert_eq!(b.c.data()[2 * 120 + 5], 1.0);
        assert_eq!(b.c.data()[120 + 5], 0.0);
    }

    #[test]
    fn single_item_only_aligns() {
        let b = make_batch(&[item(21)], None).unwrap();
        assert_eq!(b.frames, 24);
        let b = make_batch(&[item(24)], None).unwrap();
        assert_eq!(b.frames, 24);
        let b = make_batch_padded(&[item(5)], None, 16).unwrap();
        assert_eq!(b.frames, 16);
    }

    #[test]
    fn crops_to_max_frames() {
        let b = make_batch(&[item(50)], Some(30)).unwrap();
        assert_eq!(b.lengths, vec![30]);
        assert_eq!(b.frames, 32);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(make_batch(&[], None).is_err());
    }
}
