use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::annotation::PhoneAnnotation;
use super::dict::PhonemeDict;
use crate::error::{Error, Result};

/// One speaker's read and sung rendition of one song.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub speaker: String,
    pub song: String,
    pub read_wav: PathBuf,
    pub sing_wav: PathBuf,
    pub read_ann: PhoneAnnotation,
    pub sing_ann: PhoneAnnotation,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusIndex {
    pub root: PathBuf,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusIndex {
    pub fn songs(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.song.as_str()).collect()
    }
}

fn sorted_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn song_stems(dir: &Path) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_wav = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if let (true, Some(stem)) = (is_wav, path.file_stem().and_then(|s| s.to_str())) {
            out.insert(stem.to_string());
        }
    }
    Ok(out)
}

/// Indexes `root/<speaker>/{read,sing}/<song>.wav` with `.txt` phone
/// annotations next to each recording.
pub fn load_corpus(root: &Path) -> Result<CorpusIndex> {
    let dict = PhonemeDict::new();
    let mut entries = Vec::new();
    for speaker_dir in sorted_dirs(root)? {
        let speaker = speaker_dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let (read_dir, sing_dir) = (speaker_dir.join("read"), speaker_dir.join("sing"));
        let read = song_stems(&read_dir)?;
        let sing = song_stems(&sing_dir)?;
        if let Some(song) = read.symmetric_difference(&sing).next() {
            let side = if read.contains(song) { "sung" } else { "read" };
            return Err(Error::Pairing(format!(
                "speaker `{speaker}` song `{song}` has no {side} recording"
            )));
        }
        for song in read {
            let read_wav = read_dir.join(format!("{song}.wav"));
            let sing_wav = sing_dir.join(format!("{song}.wav"));
            let ann = |wav: &Path| -> Result<PhoneAnnotation> {
                let txt = wav.with_extension("txt");
                if !txt.is_file() {
                    return Err(Error::Pairing(format!(
                        "{} has no annotation file",
                        wav.display()
                    )));
                }
                PhoneAnnotation::read(&txt, &dict)
            };
            entries.push(CorpusEntry {
                speaker: speaker.clone(),
                song: song.clone(),
                read_ann: ann(&read_wav)?,
                sing_ann: ann(&sing_wav)?,
                read_wav,
                sing_wav,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::Pairing(format!(
            "no paired recordings under {}",
            root.display()
        )));
    }
    Ok(CorpusIndex {
        root: root.to_path_buf(),
        entries,
    })
}
