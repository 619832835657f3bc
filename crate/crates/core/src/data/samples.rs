use std::collections::BTreeMap;

use super::annotation::{PhoneAnnotation, PhoneInterval};
use super::corpus::CorpusIndex;
use crate::error::{Error, Result};
use crate::eval::{yin_f0, YinConfig};
use crate::prep::MelodyContour;
use crate::signal::{read_wav, resample, Waveform, INTERNAL_RATE};

pub const HOP: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    /// Shortest run of consecutive words that becomes a sample.
    pub min_words: usize,
    /// Pauses at least this long (seconds) bound a singing segment.
    pub segment_pause: f64,
    /// Song held out for testing; the last song in sorted order when unset.
    pub test_song: Option<String>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            min_words: 3,
            segment_pause: 0.1,
            test_song: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub start: f64,
    pub end: f64,
    pub phones: Vec<PhoneInterval>,
}

/// Splits an annotation into segments of words. Any pause (or unannotated
/// gap) separates words; pauses of at least `segment_pause` also end a segment.
pub fn segment_words(ann: &PhoneAnnotation, segment_pause: f64) -> Vec<Vec<Word>> {
    let mut segments = Vec::new();
    let mut words: Vec<Word> = Vec::new();
    let mut current: Vec<PhoneInterval> = Vec::new();
    let mut last_end: Option<f64> = None;

    let flush_word = |current: &mut Vec<PhoneInterval>, words: &mut Vec<Word>| {
        if let (Some(first), Some(last)) = (current.first(), current.last()) {
            words.push(Word {
                start: first.start,
                end: last.end,
                phones: std::mem::take(current),
            });
        }
    };

    for iv in &ann.intervals {
        let gap = last_end.map_or(0.0, |e| iv.start - e);
        if gap > 1e-6 {
            flush_word(&mut current, &mut words);
            if gap >= segment_pause && !words.is_empty() {
                segments.push(std::mem::take(&mut words));
            }
        }
        if iv.is_pause() {
            flush_word(&mut current, &mut words);
            if iv.duration() >= segment_pause && !words.is_empty() {
                segments.push(std::mem::take(&mut words));
            }
        } else {
            current.push(*iv);
        }
        last_end = Some(iv.end);
    }
    flush_word(&mut current, &mut words);
    if !words.is_empty() {
        segments.push(words);
    }
    segments
}

/// Inclusive word-index runs `(first, last)` of at least `min_words` words
/// within `n` words.
pub fn word_runs(n: usize, min_words: usize) -> Vec<(usize, usize)> {
    let min = min_words.max(1);
    let mut runs = Vec::new();
    for len in min..=n {
        for first in 0..=(n - len) {
            runs.push((first, first + len - 1));
        }
    }
    runs
}

/// Time spans of one sample in both recordings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub speech_span: (f64, f64),
    pub sing_span: (f64, f64),
    /// Global word indices, inclusive.
    pub words: (usize, usize),
}

/// Enumerates all word runs inside each singing segment and locates the same
/// words in the read annotation.
pub fn plan_samples(
    read_ann: &PhoneAnnotation,
    sing_ann: &PhoneAnnotation,
    cfg: &SampleConfig,
) -> Result<Vec<SamplePlan>> {
    let sing_segments = segment_words(sing_ann, cfg.segment_pause);
    let read_words: Vec<Word> = segment_words(read_ann, cfg.segment_pause)
        .into_iter()
        .flatten()
        .collect();
    let sung: usize = sing_segments.iter().map(Vec::len).sum();
    if sung != read_words.len() {
        return Err(Error::Alignment(format!(
            "{sung} sung words but {} read words",
            read_words.len()
        )));
    }
    let mut plans = Vec::new();
    let mut offset = 0;
    for seg in &sing_segments {
        for (i, j) in word_runs(seg.len(), cfg.min_words) {
            plans.push(SamplePlan {
                speech_span: (read_words[offset + i].start, read_words[offset + j].end),
                sing_span: (seg[i].start, seg[j].end),
                words: (offset + i, offset + j),
            });
        }
        offset += seg.len();
    }
    Ok(plans)
}

/// Paired training unit; annotations are relative to the sample start.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub id: String,
    pub speaker: String,
    pub song: String,
    pub speech: Waveform,
    pub singing: Waveform,
    /// One value per singing frame.
    pub contour: MelodyContour,
    /// Phone index per singing frame.
    pub frame_phones: Vec<usize>,
    pub speech_ann: PhoneAnnotation,
    pub sing_ann: PhoneAnnotation,
}

impl TrainSample {
    /// Builds a sample from aligned recordings, tracking the contour on the
    /// singing.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        id: String,
        speaker: String,
        song: String,
        speech: Waveform,
        singing: Waveform,
        speech_ann: PhoneAnnotation,
        sing_ann: PhoneAnnotation,
    ) -> Self {
        let contour = yin_f0(&singing, &YinConfig::default());
        let frame_phones = frame_labels(&sing_ann, contour.len(), singing.sample_rate);
        TrainSample {
            id,
            speaker,
            song,
            speech,
            singing,
            contour,
            frame_phones,
            speech_ann,
            sing_ann,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.contour.len()
    }
}

/// Phone at the center of each STFT frame.
pub fn frame_labels(ann: &PhoneAnnotation, n_frames: usize, sample_rate: u32) -> Vec<usize> {
    (0..n_frames)
        .map(|t| ann.phone_at((t * HOP) as f64 / sample_rate as f64))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct GeneratedSamples {
    pub train: Vec<TrainSample>,
    pub test: Vec<TrainSample>,
    /// `(speaker, song, reason)` for recordings that produced no samples.
    pub skipped: Vec<(String, String, String)>,
}

fn load_internal(path: &std::path::Path) -> Result<Waveform> {
    let w = read_wav(path)?;
    Ok(if w.sample_rate == INTERNAL_RATE {
        w
    } else {
        resample(&w, INTERNAL_RATE)
    })
}

fn span_samples(span: (f64, f64), sr: u32, len: usize) -> (usize, usize) {
    let s = ((span.0 * sr as f64).round() as usize).min(len);
    let e = ((span.1 * sr as f64).round() as usize).clamp(s, len);
    (s, e)
}

/// Cuts every recording pair into samples; the held-out song goes to `test`.
pub fn generate_samples(corpus: &CorpusIndex, cfg: &SampleConfig) -> Result<GeneratedSamples> {
    let test_song = match &cfg.test_song {
        Some(s) => s.clone(),
        None => corpus
            .songs()
            .into_iter()
            .last()
            .map(str::to_string)
            .ok_or_else(|| Error::Pairing("empty corpus".into()))?,
    };
    let mut out = GeneratedSamples::default();
    let mut counters: BTreeMap<(String, String), usize> = BTreeMap::new();
    for entry in &corpus.entries {
        let plans = match plan_samples(&entry.read_ann, &entry.sing_ann, cfg) {
            Ok(p) => p,
            Err(e @ Error::Alignment(_)) => {
                out.skipped.push((entry.speaker.clone(), entry.song.clone(), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let speech = load_internal(&entry.read_wav)?;
        let singing = load_internal(&entry.sing_wav)?;
        for plan in plans {
            let (ss, se) = span_samples(plan.speech_span, speech.sample_rate, speech.len());
            let (gs, ge) = span_samples(plan.sing_span, singing.sample_rate, singing.len());
            if se - ss < 1024 || ge - gs < 1024 {
                out.skipped.push((
                    entry.speaker.clone(),
                    entry.song.clone(),
                    format!("words {:?} shorter than one frame", plan.words),
                ));
                continue;
            }
            let n = counters
                .entry((entry.speaker.clone(), entry.song.clone()))
                .or_insert(0);
            let id = format!("{}_{}_{:04}", entry.speaker, entry.song, *n);
            *n += 1;
            let sample = TrainSample::from_parts(
                id,
                entry.speaker.clone(),
                entry.song.clone(),
                speech.slice(ss, se),
                singing.slice(gs, ge),
                entry.read_ann.window(plan.speech_span.0, plan.speech_span.1),
                entry.sing_ann.window(plan.sing_span.0, plan.sing_span.1),
            );
            if entry.song == test_song {
                out.test.push(sample);
            } else {
                out.train.push(sample);
            }
        }
    }
    Ok(out)
}
