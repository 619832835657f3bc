//! The command-line workflow end to end: prep, train, convert, eval.
//!
//! `cargo run --release --example pipeline [work_dir]`

use std::path::PathBuf;

use speech2sing::cli::run;
use speech2sing::data::cache::{read_manifest, Split};
use speech2sing::data::toy::{write_toy_corpus, ToyCorpusConfig};

fn sts(args: &[&str]) {
    println!("$ sts {}", args.join(" "));
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = run(std::iter::once("sts").chain(args.iter().copied()), &mut out, &mut err);
    assert_eq!(code, 0, "sts {} failed", args[0]);
}

fn main() -> speech2sing::Result<()> {
    let work = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into()));
    let p = |name: &str| work.join(name).to_string_lossy().into_owned();
    write_toy_corpus(&work.join("corpus"), &ToyCorpusConfig::default())?;

    let (corpus, cache, run_dir) = (p("corpus"), p("cache"), p("run"));
    sts(&["prep", &corpus, &cache, "--force"]);
    let mut train = vec!["train", &cache, &run_dir, "--epochs", "1", "--iters", "5", "--seed", "1"];
    train.extend(["--set", "widths=4,8,16", "--set", "dp_hidden=16", "--set", "batch=2"]);
    sts(&train);

    let record = read_manifest(&work.join("cache"))?
        .into_iter()
        .find(|r| r.split == Split::Test)
        .expect("a test sample");
    let ckpt = format!("{run_dir}/epoch_0.ckpt");
    let speech = work.join("cache").join(&record.speech).to_string_lossy().into_owned();
    let contour = work.join("cache").join(&record.contour).to_string_lossy().into_owned();
    sts(&["convert", &ckpt, &speech, &contour, &p("sung.wav")]);
    sts(&["eval", &cache, "--checkpoint", &ckpt, "--n", "4", "--out", &p("eval.csv")]);
    Ok(())
}
