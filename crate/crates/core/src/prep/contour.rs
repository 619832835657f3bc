use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const F0_MIN: f32 = 50.0;
pub const F0_MAX: f32 = 1500.0;
/// Contour frame period in seconds (256 samples at 16 kHz).
pub const CONTOUR_HOP_SECS: f64 = 0.016;

/// Per-frame fundamental frequency in Hz; `0.0` marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MelodyContour {
    pub f0: Vec<f32>,
    pub frame_hop: f64,
}

impl MelodyContour {
    pub fn new(f0: Vec<f32>) -> Self {
        MelodyContour {
            f0,
            frame_hop: CONTOUR_HOP_SECS,
        }
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.f0.iter().filter(|&&f| f > 0.0).count()
    }

    pub fn duration_secs(&self) -> f64 {
        self.f0.len() as f64 * self.frame_hop
    }

    /// Same contour cut or extended (with unvoiced frames) to `len` frames.
    pub fn fit_to(&self, len: usize) -> MelodyContour {
        let mut f0 = self.f0.clone();
        f0.resize(len, 0.0);
        MelodyContour {
            f0,
            frame_hop: self.frame_hop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (t, &f) in self.f0.iter().enumerate() {
            if !f.is_finite() || f < 0.0 || (f > 0.0 && !(F0_MIN..=F0_MAX).contains(&f)) {
                return Err(Error::Parameter(format!(
                    "frame {t}: f0 {f} outside [{F0_MIN}, {F0_MAX}] Hz"
                )));
            }
        }
        Ok(())
    }
}

/// F x T binary melody raster stored as one optional bin index per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourImage {
    pub n_bins: usize,
    pub bins: Vec<Option<usize>>,
}

impl ContourImage {
    pub fn n_frames(&self) -> usize {
        self.bins.len()
    }

    pub fn get(&self, f: usize, t: usize) -> bool {
        self.bins[t] == Some(f)
    }

    /// Dense row-major `F x T` mask of zeros and ones.
    pub fn to_dense(&self) -> Vec<f32> {
        let t_len = self.bins.len();
        let mut m = vec![0.0; self.n_bins * t_len];
        for (t, b) in self.bins.iter().enumerate() {
            if let Some(f) = b {
                m[f * t_len + t] = 1.0;
            }
        }
        m
    }
}

/// Reads `time_sec<TAB>f0_hz` lines; the frame period must be 16 ms.
pub fn read_contour(path: impl AsRef<Path>) -> Result<MelodyContour> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        file: file.clone(),
        line,
        message,
    };
    let mut f0 = Vec::new();
    let mut prev_time: Option<f64> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(ts), Some(fs), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(idx + 1, format!("expected `time<TAB>f0`, got {line:?}")));
        };
        let time: f64 = ts
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad time {ts:?}")))?;
        let hz: f32 = fs
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("bad f0 {fs:?}")))?;
        if let Some(p) = prev_time {
            if ((time - p) - CONTOUR_HOP_SECS).abs() > 1e-4 {
                return Err(parse_err(
                    idx + 1,
                    format!("frame period {:.4} s, expected 0.016 s", time - p),
                ));
            }
        }
        if hz != 0.0 && !(F0_MIN..=F0_MAX).contains(&hz) {
            return Err(parse_err(idx + 1, format!("f0 {hz} outside [50, 1500] Hz")));
        }
        prev_time = Some(time);
        f0.push(hz);
    }
    Ok(MelodyContour::new(f0))
}

pub fn write_contour(c: &MelodyContour, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(c.len() * 16);
    for (t, f) in c.f0.iter().enumerate() {
        let _ = writeln!(out, "{:.3}\t{:.3}", t as f64 * c.frame_hop, f);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
