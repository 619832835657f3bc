//! Command-line front end: `prep`, `train`, `convert` and `eval`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or input errors.

mod config;

pub use config::{Settings, KEYS};

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::cache::{cache_exists, load_split, read_manifest, write_cache, Split};
use crate::data::{generate_samples, load_corpus};
use crate::error::Error;
use crate::eval::{evaluate_system, rca, yin_f0, System, YinConfig};
use crate::model::{StsModel, Variant};
use crate::prep::{read_contour, MelodyContour};
use crate::signal::{read_wav, resample, write_wav, INTERNAL_RATE};
use crate::synth::predict;
use crate::tensor::checkpoint::Checkpoint;
use crate::train::train_loop;

#[derive(Debug, Parser)]
#[command(name = "sts", version, about = "Speech-to-singing conversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut a paired read/sung corpus into cached training samples.
    Prep(PrepArgs),
    /// Train a model variant on a sample cache.
    Train(TrainArgs),
    /// Sing a speech recording along a melody contour.
    Convert(ConvertArgs),
    /// Score a model (or the true singing) on the test split.
    Eval(EvalArgs),
}

/// Options shared by every command.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct PrepArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    /// Rebuild even if the cache exists.
    #[arg(long)]
    pub force: bool,
    /// Song held out as the test split.
    #[arg(long)]
    pub test_song: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    pub cache: PathBuf,
    /// Directory for checkpoints and the loss log.
    pub out: PathBuf,
    /// B1, B2, AllNorm, P-MSE or P-MTL.
    #[arg(long, default_value = "P-MTL")]
    pub variant: Variant,
    /// Align speech to singing phone by phone instead of uniformly.
    #[arg(long)]
    pub phsync: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Sum the squared error over bins and frames instead of averaging.
    #[arg(long)]
    pub sum_mse: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    pub checkpoint: PathBuf,
    pub speech: PathBuf,
    /// `time<TAB>f0` lines at a 16 ms frame period.
    pub contour: PathBuf,
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub cache: PathBuf,
    #[arg(long, required_unless_present = "oracle_passthrough")]
    pub checkpoint: Option<PathBuf>,
    /// Score the true singing instead of a model.
    #[arg(long, conflicts_with = "checkpoint")]
    pub oracle_passthrough: bool,
    /// Number of test samples.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Format(_)
            | Error::Unsupported(_)
            | Error::Parameter(_)
            | Error::Parse { .. }
            | Error::Pairing(_)
            | Error::Config(_)
            | Error::Checkpoint(_) => 2,
            _ => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn io_out(e: std::io::Error) -> CliError {
    CliError {
        code: 1,
        message: format!("cannot write output: {e}"),
    }
}

/// Treats any failure as bad input.
fn input<T>(r: crate::error::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::usage(e.to_string()))
}

fn settings(common: &CommonArgs) -> Result<Settings, CliError> {
    let mut s = match &common.config {
        Some(p) => input(Settings::load(p))?,
        None => Settings::default(),
    };
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        input(s.set(k.trim(), v.trim()))?;
    }
    if let Some(seed) = common.seed {
        input(s.set("seed", &seed.to_string()))?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepSummary {
    pub train: usize,
    pub test: usize,
    pub skipped: usize,
    /// False when an existing cache was left alone.
    pub rebuilt: bool,
}

pub fn cmd_prep(args: &PrepArgs, out: &mut dyn Write) -> Result<PrepSummary, CliError> {
    let mut s = settings(&args.common)?;
    if let Some(song) = &args.test_song {
        input(s.set("test_song", song))?;
    }
    if cache_exists(&args.out) && !args.force {
        let records = input(read_manifest(&args.out))?;
        let train = records.iter().filter(|r| r.split == Split::Train).count();
        writeln!(out, "cache up to date ({} samples)", records.len()).map_err(io_out)?;
        return Ok(PrepSummary {
            train,
            test: records.len() - train,
            skipped: 0,
            rebuilt: false,
        });
    }
    let corpus = input(load_corpus(&args.corpus))?;
    if corpus.entries.is_empty() {
        return Err(CliError::usage(format!(
            "no paired recordings under {}",
            args.corpus.display()
        )));
    }
    let generated = input(generate_samples(&corpus, &input(s.sample_config())?))?;
    write_cache(&args.out, &generated)?;
    for (speaker, song, reason) in &generated.skipped {
        writeln!(out, "skipped {speaker}/{song}: {reason}").map_err(io_out)?;
    }
    let summary = PrepSummary {
        train: generated.train.len(),
        test: generated.test.len(),
        skipped: generated.skipped.len(),
        rebuilt: true,
    };
    writeln!(out, "train {}\ntest {}", summary.train, summary.test).map_err(io_out)?;
    Ok(summary)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<Vec<PathBuf>, CliError> {
    let mut s = settings(&args.common)?;
    if let Some(e) = args.epochs {
        input(s.set("epochs", &e.to_string()))?;
    }
    if let Some(i) = args.iters {
        input(s.set("iters_per_epoch", &i.to_string()))?;
    }
    if args.phsync {
        input(s.set("alignment", "phsync"))?;
    }
    if args.sum_mse {
        input(s.set("sum_mse", "true"))?;
    }
    let cfg = input(s.train_config(args.variant))?;
    let model_cfg = input(s.model_config(args.variant))?;
    if !cache_exists(&args.cache) {
        return Err(CliError::usage(format!(
            "no sample cache in {}; run `sts prep` first",
            args.cache.display()
        )));
    }
    let samples = input(load_split(&args.cache, Split::Train))?;
    if samples.is_empty() {
        return Err(CliError::usage("the cache has no training samples"));
    }
    let mut model = StsModel::new(model_cfg)?;
    writeln!(
        out,
        "training {} on {} samples: {} epochs x {} iterations, lambda {}",
        args.variant,
        samples.len(),
        cfg.epochs,
        cfg.iters_per_epoch,
        cfg.lambda
    )
    .map_err(io_out)?;
    let outcome = train_loop(&mut model, &samples, &cfg, Some(&args.out))?;
    for (epoch, chunk) in outcome.reports.chunks(cfg.iters_per_epoch).enumerate() {
        let mean = chunk.iter().map(|r| r.total).sum::<f64>() / chunk.len() as f64;
        writeln!(out, "epoch {epoch}: mean loss {mean:.5}").map_err(io_out)?;
    }
    if let Some(last) = outcome.checkpoints.last() {
        writeln!(out, "wrote {}", last.display()).map_err(io_out)?;
    }
    Ok(outcome.checkpoints)
}

fn load_model(path: &Path) -> Result<StsModel, CliError> {
    input(Checkpoint::load(path).and_then(|ck| StsModel::from_checkpoint(&ck)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertSummary {
    pub seconds: f64,
    pub rca: f64,
}

pub fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<ConvertSummary, CliError> {
    let s = settings(&args.common)?;
    let gl = input(s.griffin_lim())?;
    let model = load_model(&args.checkpoint)?;
    let speech = input(read_wav(&args.speech))?;
    let speech = if speech.sample_rate == INTERNAL_RATE {
        speech
    } else {
        resample(&speech, INTERNAL_RATE)
    };
    let contour: MelodyContour = input(read_contour(&args.contour))?;
    let mut sung = predict(&model, &speech, &contour, &gl)?;
    let target_len = (contour.duration_secs() * INTERNAL_RATE as f64).round() as usize;
    sung.samples.resize(target_len, 0.0);
    write_wav(&sung, &args.out)?;
    let score = if contour.voiced_count() > 0 {
        rca(&contour, &yin_f0(&sung, &YinConfig::default()))?
    } else {
        0.0
    };
    let summary = ConvertSummary {
        seconds: sung.duration_secs(),
        rca: score,
    };
    writeln!(
        out,
        "wrote {}: {:.3} s, rca {:.3}",
        args.out.display(),
        summary.seconds,
        summary.rca
    )
    .map_err(io_out)?;
    Ok(summary)
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<crate::eval::MetricReport, CliError> {
    let s = settings(&args.common)?;
    let seed = input(s.seed())?;
    if !cache_exists(&args.cache) {
        return Err(CliError::usage(format!(
            "no sample cache in {}",
            args.cache.display()
        )));
    }
    let samples = input(load_split(&args.cache, Split::Test))?;
    let model;
    let system = match &args.checkpoint {
        Some(path) if !args.oracle_passthrough => {
            model = load_model(path)?;
            System::Model(&model, input(s.griffin_lim())?)
        }
        _ => System::Oracle,
    };
    let report = evaluate_system(system, &samples, args.n, seed)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    match &args.out {
        Some(path) => {
            report.write_csv(path)?;
            writeln!(
                out,
                "{} samples: mean lsd {:.3} dB, mean rca {:.3}",
                report.rows.len(),
                report.mean_lsd_db,
                report.mean_rca
            )
            .map_err(io_out)?;
        }
        None => out.write_all(report.to_csv().as_bytes()).map_err(io_out)?,
    }
    Ok(report)
}

/// Parses `args` (program name first) and runs the command, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match &cli.command {
        Command::Prep(a) => cmd_prep(a, out).map(drop),
        Command::Train(a) => cmd_train(a, out).map(drop),
        Command::Convert(a) => cmd_convert(a, out).map(drop),
        Command::Eval(a) => cmd_eval(a, out).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
