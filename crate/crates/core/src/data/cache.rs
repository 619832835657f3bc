use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotation::{PhoneAnnotation, PhoneInterval};
use super::dict::PhonemeDict;
use super::samples::{frame_labels, GeneratedSamples, TrainSample};
use crate::error::{Error, Result};
use crate::prep::{read_contour, write_contour};
use crate::signal::{read_wav, write_wav};

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub split: Split,
    pub speaker: String,
    pub song: String,
    pub speech: String,
    pub singing: String,
    pub contour: String,
    pub frames: usize,
    pub speech_seconds: f64,
    pub speech_phones: Vec<(f64, f64, String)>,
    pub sing_phones: Vec<(f64, f64, String)>,
}

fn phones_to_rows(ann: &PhoneAnnotation, dict: &PhonemeDict) -> Vec<(f64, f64, String)> {
    ann.intervals
        .iter()
        .map(|iv| (iv.start, iv.end, dict.name(iv.phone).unwrap_or("SIL").to_string()))
        .collect()
}

fn rows_to_phones(rows: &[(f64, f64, String)], dict: &PhonemeDict) -> Result<PhoneAnnotation> {
    let intervals = rows
        .iter()
        .map(|(s, e, p)| {
            Ok(PhoneInterval {
                start: *s,
                end: *e,
                phone: dict
                    .index(p)
                    .ok_or_else(|| Error::Config(format!("unknown phone `{p}` in manifest")))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhoneAnnotation { intervals })
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST)
}

pub fn cache_exists(dir: &Path) -> bool {
    manifest_path(dir).is_file()
}

/// Writes waveforms, contours and a JSON-lines manifest under `dir`.
pub fn write_cache(dir: &Path, samples: &GeneratedSamples) -> Result<usize> {
    let dict = PhonemeDict::new();
    let audio = dir.join("audio");
    fs::create_dir_all(&audio).map_err(|e| Error::io(&audio, e))?;
    let path = manifest_path(dir);
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    let all = samples
        .train
        .iter()
        .map(|s| (Split::Train, s))
        .chain(samples.test.iter().map(|s| (Split::Test, s)));
    let mut count = 0;
    for (split, s) in all {
        let speech = format!("audio/{}_speech.wav", s.id);
        let singing = format!("audio/{}_sing.wav", s.id);
        let contour = format!("audio/{}_contour.txt", s.id);
        write_wav(&s.speech, dir.join(&speech))?;
        write_wav(&s.singing, dir.join(&singing))?;
        write_contour(&s.contour, dir.join(&contour))?;
        let record = ManifestRecord {
            id: s.id.clone(),
            split,
            speaker: s.speaker.clone(),
            song: s.song.clone(),
            speech,
            singing,
            contour,
            frames: s.n_frames(),
            speech_seconds: s.speech.duration_secs(),
            speech_phones: phones_to_rows(&s.speech_ann, &dict),
            sing_phones: phones_to_rows(&s.sing_ann, &dict),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Config(format!("cannot encode manifest: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(&path, e))?;
        count += 1;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;
    Ok(count)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRecord>> {
    let path = manifest_path(dir);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Loads every cached sample of `split`, in manifest order.
pub fn load_split(dir: &Path, split: Split) -> Result<Vec<TrainSample>> {
    let dict = PhonemeDict::new();
    read_manifest(dir)?
        .into_iter()
        .filter(|r| r.split == split)
        .map(|r| {
            let speech = read_wav(dir.join(&r.speech))?;
            let singing = read_wav(dir.join(&r.singing))?;
            let contour = read_contour(dir.join(&r.contour))?.fit_to(r.frames);
            let sing_ann = rows_to_phones(&r.sing_phones, &dict)?;
            let frame_phones = frame_labels(&sing_ann, r.frames, singing.sample_rate);
            Ok(TrainSample {
                id: r.id,
                speaker: r.speaker,
                song: r.song,
                speech,
                singing,
                contour,
                frame_phones,
                speech_ann: rows_to_phones(&r.speech_phones, &dict)?,
                sing_ann,
            })
        })
        .collect()
}
