//! Write a small synthetic corpus of paired read and sung recordings.
//!
//! `cargo run --example toy_corpus [out_dir]`

use std::path::PathBuf;

use speech2sing::data::load_corpus;
use speech2sing::data::toy::{write_toy_corpus, ToyCorpusConfig};

fn main() -> speech2sing::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "toy_corpus".into()));
    let cfg = ToyCorpusConfig::default();
    write_toy_corpus(&root, &cfg)?;
    let index = load_corpus(&root)?;
    println!(
        "{} speakers x {} songs written to {}; songs: {:?}",
        cfg.speakers,
        cfg.songs,
        root.display(),
        index.songs()
    );
    Ok(())
}
