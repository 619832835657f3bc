use crate::error::{Error, Result};
use crate::prep::{LogMagSpectrogram, MelodyContour};

pub const LSD_BAND_LO_HZ: f64 = 100.0;
pub const LSD_BAND_HI_HZ: f64 = 3500.0;
/// Amplitude floor applied before the dB conversion (-80 dB).
pub const DB_FLOOR: f64 = -80.0;
/// Chroma tolerance in cents.
pub const RCA_TOLERANCE_CENTS: f64 = 50.0;

/// Bins whose center frequency lies in `[lo, hi]` Hz, inclusive.
pub fn band_bins(n_bins: usize, fft_size: usize, sample_rate: u32, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let first = (lo / bin_hz).ceil() as usize;
    let last = ((hi / bin_hz).floor() as usize).min(n_bins - 1);
    first..=last
}

/// `20 log10` amplitude of a `log(1+x)` spectrogram, floored at -80 dB.
pub fn to_db(lm: &LogMagSpectrogram) -> Vec<f64> {
    let floor = 10f64.powf(DB_FLOOR / 20.0);
    lm.values
        .iter()
        .map(|&v| 20.0 * ((v as f64).exp_m1().max(floor)).log10())
        .collect()
}

/// Mean over frames of the Euclidean distance between dB spectra restricted to `band`.
///
/// Both inputs are row-major `n_bins x n_frames`.
pub fn lsd_db(
    a: &[f64],
    b: &[f64],
    n_bins: usize,
    n_frames: usize,
    band: std::ops::RangeInclusive<usize>,
) -> Result<f64> {
    if a.len() != n_bins * n_frames || b.len() != a.len() {
        return Err(Error::Shape(format!(
            "lsd inputs {} and {} do not match {n_bins}x{n_frames}",
            a.len(),
            b.len()
        )));
    }
    if n_frames == 0 {
        return Err(Error::Shape("lsd of zero frames".into()));
    }
    let total: f64 = (0..n_frames)
        .map(|t| {
            band.clone()
                .map(|f| {
                    let d = a[f * n_frames + t] - b[f * n_frames + t];
                    d * d
                })
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / n_frames as f64)
}

/// Log-spectral distance in dB over 100 Hz - 3.5 kHz (16 kHz, 1024-point FFT grid).
pub fn lsd(y: &LogMagSpectrogram, y_hat: &LogMagSpectrogram) -> Result<f64> {
    if y.n_bins != y_hat.n_bins || y.n_frames != y_hat.n_frames {
        return Err(Error::Shape(format!(
            "lsd of {}x{} against {}x{}",
            y.n_bins, y.n_frames, y_hat.n_bins, y_hat.n_frames
        )));
    }
    let fft_size = 2 * (y.n_bins - 1);
    let band = band_bins(y.n_bins, fft_size, 16_000, LSD_BAND_LO_HZ, LSD_BAND_HI_HZ);
    lsd_db(&to_db(y), &to_db(y_hat), y.n_bins, y.n_frames, band)
}

/// Octave-folded distance in cents between two positive frequencies, in `[0, 600]`.
pub fn chroma_distance_cents(estimate: f64, reference: f64) -> f64 {
    // exact power-of-two normalization into [1, 2)
    let mut r = estimate / reference;
    while r >= 2.0 {
        r /= 2.0;
    }
    while r < 1.0 {
        r *= 2.0;
    }
    let c = 1200.0 * r.log2();
    c.min(1200.0 - c)
}

/// Raw chroma accuracy over reference-voiced frames; unvoiced estimates are misses.
pub fn rca(reference: &MelodyContour, estimate: &MelodyContour) -> Result<f64> {
    let est = estimate.fit_to(reference.len());
    let mut voiced = 0usize;
    let mut hits = 0usize;
    for (&r, &e) in reference.f0.iter().zip(&est.f0) {
        if r <= 0.0 {
            continue;
        }
        voiced += 1;
        if e > 0.0 && chroma_distance_cents(e as f64, r as f64) <= RCA_TOLERANCE_CENTS {
            hits += 1;
        }
    }
    if voiced == 0 {
        return Err(Error::Contract("reference contour has no voiced frames".into()));
    }
    Ok(hits as f64 / voiced as f64)
}
