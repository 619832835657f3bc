use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::Waveform;
use crate::error::{Error, Result};

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::Format(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => Error::Unsupported(format!("{}", path.display())),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

/// Reads a 16-bit PCM or 32-bit float WAV file, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::Unsupported(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    };
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| {
            let mean = frame.iter().sum::<f32>() / channels as f32;
            if mean.is_finite() {
                mean.clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes 16-bit PCM mono, clipping to full scale.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &w.samples {
        let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw16(path: &Path, channels: u16, rate: u32, data: &[i16]) {
        let spec = WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &d in data {
            w.write_sample(d).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn silence_reads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_raw16(&p, 1, 16000, &vec![0; 16000]);
        let w = read_wav(&p).unwrap();
        assert_eq!(w.len(), 16000);
        assert_eq!(w.sample_rate, 16000);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_opposite_channels_average_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let data: Vec<i16> = (0..200).flat_map(|_| [16384i16, -16384]).collect();
        write_raw16(&p, 2, 44100, &data);
        let w = read_wav(&p).unwrap();
        assert_eq!(w.len(), 200);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_is_scaled_by_two_to_fifteen() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fs.wav");
        write_raw16(&p, 1, 16000, &[32767]);
        let w = read_wav(&p).unwrap();
        assert_eq!(w.samples[0], 32767.0 / 32768.0);
    }

    #[test]
    fn float_wav_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.write_sample(-0.5f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(read_wav(&p).unwrap().samples, vec![0.25, -0.5]);
    }

    #[test]
    fn round_trip_within_one_quantization_step() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f32> = (0..5000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Waveform::new(samples, 16000);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        write_wav(&w, &p).unwrap();
        let back = read_wav(&p).unwrap();
        let max_err = w
            .samples
            .iter()
            .zip(&back.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 32768.0, "max error {max_err}");
    }

    #[test]
    fn empty_and_clipped_writes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_wav(&Waveform::new(vec![], 16000), &p).unwrap();
        assert!(read_wav(&p).unwrap().is_empty());

        let p = dir.path().join("c.wav");
        write_wav(&Waveform::new(vec![1.5, -1.5], 16000), &p).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.samples, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn garbage_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"definitely not a riff file").unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Format(_))));
    }

    #[test]
    fn eight_bit_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_wav("/nonexistent/nope.wav"),
            Err(Error::Io { .. })
        ));
    }
}
