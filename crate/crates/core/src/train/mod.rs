//! Training: the joint spectrogram/phoneme objective, Adam, the per-epoch
//! learning-rate decay, pitch-shift augmentation and checkpointing.

mod adam;
mod loss;

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::{adam_step, AdamState};
pub use loss::{mtl_loss, LossVars};

use crate::data::{make_batch_padded, Alignment, Batch, FeatureItem, TrainSample};
use crate::error::{Error, Result};
use crate::model::{StsModel, Variant};
use crate::tensor::Tape;

pub const LOG_FILE: &str = "train_log.csv";
pub const LOG_HEADER: &str = "iter,epoch,lr,total,mse,ce";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the phoneme cross-entropy; zero trains on MSE alone.
    pub lambda: f64,
    pub lr0: f64,
    /// Multiplicative learning-rate decay per epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Random speech pitch shift in `[-max_shift, max_shift]` semitones.
    pub augment: bool,
    pub max_shift: f64,
    /// Sum squared errors over each sample instead of averaging.
    pub sum_mse: bool,
    pub alignment: Alignment,
    /// Crops longer samples to this many frames.
    pub max_frames: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: crate::model::MTL_LAMBDA,
            lr0: 0.002,
            lr_decay: 0.92,
            epochs: 14,
            iters_per_epoch: 1000,
            batch: 16,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            augment: true,
            max_shift: 1.0,
            sum_mse: false,
            alignment: Alignment::Uniform,
            max_frames: None,
        }
    }
}

impl TrainConfig {
    /// Defaults with the loss weight of `variant`.
    pub fn for_variant(variant: Variant) -> Self {
        TrainConfig {
            lambda: variant.lambda(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr0", self.lr0),
            ("lr_decay", self.lr_decay),
            ("eps", self.eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("`lambda` must be >= 0, got {}", self.lambda)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("`{name}` must lie in [0, 1), got {b}")));
            }
        }
        for (name, n) in [
            ("epochs", self.epochs),
            ("iters_per_epoch", self.iters_per_epoch),
            ("batch", self.batch),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if !(self.max_shift >= 0.0 && self.max_shift.is_finite()) {
            return Err(Error::Config(format!("`max_shift` must be >= 0, got {}", self.max_shift)));
        }
        if self.max_frames == Some(0) {
            return Err(Error::Config("`max_frames` must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate used throughout epoch `epoch` (zero-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.lr_decay.powi(epoch as i32)
    }
}

/// Loss terms of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub iter: usize,
    pub epoch: usize,
    pub lr: f64,
    pub total: f64,
    pub mse: f64,
    /// Zero for variants without a phoneme decoder.
    pub ce: f64,
    pub frames: usize,
}

impl LossReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
            self.iter, self.epoch, self.lr, self.total, self.mse, self.ce
        )
    }
}

/// Loss of `model` on `batch` without updating anything.
pub fn batch_loss(model: &StsModel, batch: &Batch, lambda: f64, sum_mse: bool) -> Result<LossReport> {
    let mut tape = Tape::<f32>::new();
    let p = model.params().bind(&mut tape);
    let vars = record_loss(&mut tape, model, &p, batch, lambda, sum_mse)?;
    Ok(report(&tape, vars, batch))
}

fn record_loss(
    tape: &mut Tape<f32>,
    model: &StsModel,
    p: &crate::nn::Bound,
    batch: &Batch,
    lambda: f64,
    sum_mse: bool,
) -> Result<LossVars> {
    let x = tape.constant(batch.x.clone());
    let c = model.flags().use_contour.then(|| tape.constant(batch.c.clone()));
    let y = tape.constant(batch.y.clone());
    let out = model.forward(tape, p, x, c)?;
    mtl_loss(tape, out.prediction, y, out.logits, &batch.phones, &batch.mask, lambda, sum_mse)
}

fn report(tape: &Tape<f32>, vars: LossVars, batch: &Batch) -> LossReport {
    LossReport {
        iter: 0,
        epoch: 0,
        lr: 0.0,
        total: tape.value(vars.total).item() as f64,
        mse: tape.value(vars.mse).item() as f64,
        ce: vars.ce.map_or(0.0, |c| tape.value(c).item() as f64),
        frames: batch.lengths.iter().sum(),
    }
}

/// Runs optimisation steps on a fixed training set.
pub struct Trainer<'a> {
    model: &'a mut StsModel,
    samples: &'a [TrainSample],
    cfg: TrainConfig,
    adam: AdamState,
    rng: ChaCha8Rng,
    features: HashMap<usize, FeatureItem>,
    iter: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut StsModel, samples: &'a [TrainSample], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if samples.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        let adam = AdamState::new(model.params().values(), cfg.beta1, cfg.beta2, cfg.eps);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Trainer {
            model,
            samples,
            cfg,
            adam,
            rng,
            features: HashMap::new(),
            iter: 0,
        })
    }

    pub fn model(&self) -> &StsModel {
        self.model
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Draws the next batch: distinct samples, one pitch shift each.
    pub fn next_batch(&mut self) -> Result<(Batch, Vec<String>)> {
        let n = self.samples.len();
        let picks = sample_indices(&mut self.rng, n, self.cfg.batch.min(n)).into_vec();
        let mut items = Vec::with_capacity(picks.len());
        for &i in &picks {
            let shift = if self.cfg.augment && self.cfg.max_shift > 0.0 {
                self.rng.gen_range(-self.cfg.max_shift..=self.cfg.max_shift)
            } else {
                0.0
            };
            let item = if shift == 0.0 {
                match self.features.get(&i) {
                    Some(f) => f.clone(),
                    None => {
                        let f = FeatureItem::from_sample(&self.samples[i], self.cfg.alignment, 0.0)?;
                        self.features.insert(i, f.clone());
                        f
                    }
                }
            } else {
                FeatureItem::from_sample(&self.samples[i], self.cfg.alignment, shift)?
            };
            items.push(item);
        }
        let min = self.model.padded_frames(1);
        let batch = make_batch_padded(&items, self.cfg.max_frames, min)?;
        let ids = picks.iter().map(|&i| self.samples[i].id.clone()).collect();
        Ok((batch, ids))
    }

    /// Forward, backward and one Adam update on `batch`.
    pub fn step_on(&mut self, batch: &Batch, ids: &[String], lr: f64) -> Result<LossReport> {
        let mut tape = Tape::<f32>::new();
        let p = self.model.params().bind(&mut tape);
        let vars = record_loss(&mut tape, self.model, &p, batch, self.cfg.lambda, self.cfg.sum_mse)?;
        let mut rep = report(&tape, vars, batch);
        rep.iter = self.iter;
        rep.lr = lr;
        if !rep.total.is_finite() {
            return Err(Error::NonFinite {
                iteration: self.iter,
                samples: ids.to_vec(),
            });
        }
        let grads = tape.backward(vars.total)?;
        let per_param: Vec<_> = p.vars().iter().map(|&v| grads.get(v)).collect();
        adam_step(self.model.params_mut().values_mut(), &per_param, &mut self.adam, lr)?;
        self.iter += 1;
        Ok(rep)
    }

    /// One iteration of epoch `epoch`.
    pub fn step(&mut self, epoch: usize) -> Result<LossReport> {
        let (batch, ids) = self.next_batch()?;
        let lr = self.cfg.lr_at(epoch);
        let mut rep = self.step_on(&batch, &ids, lr)?;
        rep.epoch = epoch;
        Ok(rep)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    pub reports: Vec<LossReport>,
    pub checkpoints: Vec<PathBuf>,
}

/// Full schedule. With `out_dir`, appends every iteration to the CSV log
/// and writes `epoch_{n}.ckpt` after each epoch.
pub fn train_loop(
    model: &mut StsModel,
    samples: &[TrainSample],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    let mut log = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(LOG_FILE);
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "{LOG_HEADER}").map_err(|e| Error::io(&path, e))?;
            Some((w, path))
        }
        None => None,
    };
    let mut outcome = TrainOutcome::default();
    let mut trainer = Trainer::new(model, samples, cfg.clone())?;
    for epoch in 0..cfg.epochs {
        for _ in 0..cfg.iters_per_epoch {
            let rep = trainer.step(epoch)?;
            if let Some((w, path)) = log.as_mut() {
                writeln!(w, "{}", rep.csv_row()).map_err(|e| Error::io(&*path, e))?;
            }
            outcome.reports.push(rep);
        }
        if let (Some(dir), Some((w, path))) = (out_dir, log.as_mut()) {
            w.flush().map_err(|e| Error::io(&*path, e))?;
            let mut ck = trainer.model().to_checkpoint();
            ck.header.insert("epoch".into(), epoch.to_string());
            ck.header.insert("iterations".into(), trainer.iterations().to_string());
            ck.header.insert("lambda".into(), cfg.lambda.to_string());
            let ck_path = dir.join(format!("epoch_{epoch}.ckpt"));
            ck.save(&ck_path)?;
            outcome.checkpoints.push(ck_path);
        }
    }
    Ok(outcome)
}
