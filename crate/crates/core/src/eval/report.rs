use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lsd, rca, yin_f0, YinConfig};
use crate::data::TrainSample;
use crate::error::{Error, Result};
use crate::model::StsModel;
use crate::prep::log_mag;
use crate::signal::{stft, StftConfig};
use crate::synth::{griffin_lim, inv_log_mag, prepare_input, GriffinLimConfig};

pub const MIN_SPEECH_SECS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub id: String,
    pub lsd_db: f64,
    pub rca: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub mean_lsd_db: f64,
    pub mean_rca: f64,
    /// Set when fewer eligible samples than requested were available.
    pub warning: Option<String>,
}

impl MetricReport {
    fn from_rows(rows: Vec<MetricRow>, warning: Option<String>) -> Self {
        let n = rows.len().max(1) as f64;
        MetricReport {
            mean_lsd_db: rows.iter().map(|r| r.lsd_db).sum::<f64>() / n,
            mean_rca: rows.iter().map(|r| r.rca).sum::<f64>() / n,
            rows,
            warning,
        }
    }

    /// One row per sample and a final `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,lsd_db,rca\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6}", r.id, r.lsd_db, r.rca);
        }
        let _ = writeln!(s, "mean,{:.6},{:.6}", self.mean_lsd_db, self.mean_rca);
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// What produces the estimate for each test sample.
#[derive(Debug, Clone, Copy)]
pub enum System<'a> {
    Model(&'a StsModel, GriffinLimConfig),
    /// The true singing itself, as an upper bound on the metrics.
    Oracle,
}

/// Scores a seeded random subset of at most `n` test samples whose speech
/// lasts at least one second and whose melody has voiced frames.
pub fn evaluate_system(
    system: System<'_>,
    samples: &[TrainSample],
    n: usize,
    seed: u64,
) -> Result<MetricReport> {
    let eligible: Vec<&TrainSample> = samples
        .iter()
        .filter(|s| s.speech.duration_secs() >= MIN_SPEECH_SECS && s.contour.voiced_count() > 0)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config(format!(
            "no test sample has at least {MIN_SPEECH_SECS} s of speech and a voiced melody"
        )));
    }
    let take = n.min(eligible.len());
    let warning = (take < n).then(|| {
        format!("only {} eligible test samples, evaluating all of them", eligible.len())
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample_indices(&mut rng, eligible.len(), take).into_vec();
    picks.sort_unstable();

    let cfg = StftConfig::default();
    let yin = YinConfig::default();
    let mut rows = Vec::with_capacity(take);
    for i in picks {
        let s = eligible[i];
        let y = log_mag(&stft(&s.singing, &cfg)?);
        let contour = s.contour.fit_to(y.n_frames);
        let (y_hat, estimate) = match system {
            System::Oracle => (y.clone(), yin_f0(&s.singing, &yin)),
            System::Model(model, gl) => {
                let (x, c) = prepare_input(&s.speech, &contour)?;
                let c = model.flags().use_contour.then_some(&c);
                let y_hat = model.predict_log_mag(&x, c)?;
                let wave = griffin_lim(&inv_log_mag(&y_hat), &gl, s.singing.sample_rate)?;
                (y_hat, yin_f0(&wave, &yin))
            }
        };
        rows.push(MetricRow {
            id: s.id.clone(),
            lsd_db: lsd(&y, &y_hat)?,
            rca: rca(&contour, &estimate)?,
        });
    }
    Ok(MetricReport::from_rows(rows, warning))
}
