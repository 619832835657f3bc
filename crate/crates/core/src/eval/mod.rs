//! Objective metrics (log-spectral distance, raw chroma accuracy) and the
//! YIN pitch tracker used for contour extraction and evaluation.

mod metrics;
mod report;
mod yin;

pub use metrics::{
    band_bins, chroma_distance_cents, lsd, lsd_db, rca, to_db, DB_FLOOR, LSD_BAND_HI_HZ,
    LSD_BAND_LO_HZ, RCA_TOLERANCE_CENTS,
};
pub use report::{evaluate_system, MetricReport, MetricRow, System, MIN_SPEECH_SECS};
pub use yin::{yin_f0, YinConfig};
