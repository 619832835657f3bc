//! Synthetic speech/singing pairs: harmonic vowels shaped by two formants,
//! nasals, and band-limited noise fricatives.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::annotation::{PhoneAnnotation, PhoneInterval};
use super::dict::PhonemeDict;
use super::samples::TrainSample;
use crate::error::{Error, Result};
use crate::signal::{write_wav, Waveform, INTERNAL_RATE};

#[derive(Debug, Clone, Copy)]
enum Sound {
    Voiced { formants: [f64; 2], bandwidth: f64 },
    Noise { center: f64, q: f64, gain: f64 },
    Silent,
}

fn sound(phone: usize) -> Sound {
    let dict = PhonemeDict::new();
    let voiced = |f1, f2| Sound::Voiced {
        formants: [f1, f2],
        bandwidth: 90.0,
    };
    match dict.name(phone).unwrap_or("SIL") {
        "AA" => voiced(730.0, 1090.0),
        "AE" => voiced(660.0, 1720.0),
        "EH" => voiced(530.0, 1840.0),
        "IY" => voiced(270.0, 2290.0),
        "OW" => voiced(570.0, 840.0),
        "UW" => voiced(300.0, 870.0),
        "M" => Sound::Voiced {
            formants: [250.0, 1200.0],
            bandwidth: 60.0,
        },
        "N" => Sound::Voiced {
            formants: [250.0, 1700.0],
            bandwidth: 60.0,
        },
        "S" => Sound::Noise {
            center: 5000.0,
            q: 2.0,
            gain: 0.12,
        },
        "SH" => Sound::Noise {
            center: 2800.0,
            q: 2.5,
            gain: 0.12,
        },
        "F" => Sound::Noise {
            center: 4000.0,
            q: 0.8,
            gain: 0.05,
        },
        _ => Sound::Silent,
    }
}

/// Consonant-vowel words the synthesizer can render.
pub const WORDS: [[&str; 2]; 12] = [
    ["M", "AA"],
    ["S", "IY"],
    ["N", "OW"],
    ["SH", "UW"],
    ["F", "EH"],
    ["M", "IY"],
    ["S", "AA"],
    ["N", "EH"],
    ["SH", "AE"],
    ["F", "OW"],
    ["M", "UW"],
    ["N", "AE"],
];

/// Partials per voiced sound, with 1/k^2 amplitude rolloff.
const HARMONICS: usize = 2;

fn phone(name: &str) -> usize {
    PhonemeDict::new().index(name).expect("toy phone in dictionary")
}

/// Renders `(phone, seconds)` segments with a time-varying f0 (Hz, by time in
/// seconds). Formant frequencies are scaled by `formant_scale`.
pub fn render(
    segments: &[(usize, f64)],
    f0: &dyn Fn(f64) -> f64,
    formant_scale: f64,
    seed: u64,
) -> (Waveform, PhoneAnnotation) {
    let sr = INTERNAL_RATE as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut intervals = Vec::new();
    let mut phase = 0.0f64;
    let mut t0 = 0.0;
    for &(ph, dur) in segments {
        let start = samples.len();
        let n = ((t0 + dur) * sr).round() as usize - start;
        let ramp = (0.008 * sr) as usize;
        let env = |i: usize| {
            let edge = i.min(n - 1 - i);
            if edge >= ramp {
                1.0
            } else {
                0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
            }
        };
        match sound(ph) {
            Sound::Voiced { formants, bandwidth } => {
                for i in 0..n {
                    let t = (start + i) as f64 / sr;
                    let f = f0(t);
                    phase += 2.0 * PI * f / sr;
                    let mut acc = 0.0;
                    let mut norm = 0.0;
                    for k in 1..=HARMONICS {
                        let hf = k as f64 * f;
                        let a: f64 = formants
                            .iter()
                            .map(|&fm| {
                                let d = (hf - fm * formant_scale) / bandwidth;
                                1.0 / (1.0 + d * d)
                            })
                            .sum::<f64>()
                            + 0.02;
                        let a = a / (k * k) as f64;
                        acc += a * (k as f64 * phase).sin();
                        norm += a;
                    }
                    samples.push((0.3 * acc / norm.max(1e-9) * env(i)) as f32);
                }
            }
            Sound::Noise { center, q, gain } => {
                // RBJ band-pass biquad over white noise
                let w0 = 2.0 * PI * (center * formant_scale).min(0.45 * sr) / sr;
                let alpha = w0.sin() / (2.0 * q);
                let a0 = 1.0 + alpha;
                let (b0, b2) = (alpha / a0, -alpha / a0);
                let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
                let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let x: f64 = rng.gen_range(-1.0..1.0);
                    let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
                    (x2, x1, y2, y1) = (x1, x, y1, y);
                    samples.push((gain * y * env(i)) as f32);
                }
            }
            Sound::Silent => samples.extend(std::iter::repeat(0.0f32).take(n)),
        }
        intervals.push(PhoneInterval {
            start: t0,
            end: t0 + dur,
            phone: ph,
        });
        t0 += dur;
    }
    let ann = PhoneAnnotation { intervals };
    (Waveform::new(samples, INTERNAL_RATE), ann)
}

/// Frame count of every toy singing sample.
pub const TOY_FRAMES: usize = 40;

fn lyric(idx: usize) -> Vec<[&'static str; 2]> {
    match idx {
        0 => vec![WORDS[0], WORDS[1], WORDS[2]],
        _ => vec![WORDS[3], WORDS[4], WORDS[5]],
    }
}

fn melody(idx: usize) -> [f64; 3] {
    match idx {
        0 => [218.75, 265.625, 203.125],
        _ => [265.625, 203.125, 234.375],
    }
}

fn speech_segments(words: &[[&str; 2]]) -> Vec<(usize, f64)> {
    let sil = PhonemeDict::SIL;
    let mut segs = vec![(sil, 0.05)];
    for (i, w) in words.iter().enumerate() {
        segs.push((phone(w[0]), 0.07));
        segs.push((phone(w[1]), 0.23));
        if i + 1 < words.len() {
            segs.push((sil, 0.03));
        }
    }
    segs.push((sil, 0.05));
    segs
}

/// Four samples: two spoken lyrics, each paired with two melodies. Every
/// singing sample has exactly [`TOY_FRAMES`] frames, so the speech alone
/// cannot tell the melodies apart.
pub fn toy_samples(seed: u64) -> Vec<TrainSample> {
    let sr = INTERNAL_RATE as f64;
    let sing_len = (TOY_FRAMES - 1) * 256;
    let consonant = 0.05;
    let vowel = (sing_len as f64 / sr - 3.0 * consonant) / 3.0;
    let mut out = Vec::new();
    for l in 0..2 {
        let words = lyric(l);
        let (speech, speech_ann) = render(
            &speech_segments(&words),
            &|t| 140.0 - 40.0 * t,
            1.0,
            seed.wrapping_add(l as u64),
        );
        for m in 0..2 {
            let notes = melody(m);
            let mut segs = Vec::new();
            for w in &words {
                segs.push((phone(w[0]), consonant));
                segs.push((phone(w[1]), vowel));
            }
            let word_len = consonant + vowel;
            let pitch = move |t: f64| notes[((t / word_len) as usize).min(2)];
            let (mut singing, sing_ann) =
                render(&segs, &pitch, 1.0, seed.wrapping_add(100 + 10 * l as u64 + m as u64));
            singing.samples.resize(sing_len, 0.0);
            out.push(TrainSample::from_parts(
                format!("toy_l{l}_m{m}"),
                "toy".into(),
                format!("melody{m}"),
                speech.clone(),
                singing,
                speech_ann.clone(),
                sing_ann,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpusConfig {
    pub speakers: usize,
    pub songs: usize,
    pub segments: usize,
    pub words_per_segment: usize,
    pub seed: u64,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            speakers: 2,
            songs: 3,
            segments: 2,
            words_per_segment: 5,
            seed: 0,
        }
    }
}

/// Writes `root/<speaker>/{read,sing}/<song>.{wav,txt}`.
pub fn write_toy_corpus(root: &Path, cfg: &ToyCorpusConfig) -> Result<()> {
    if cfg.speakers == 0 || cfg.songs == 0 || cfg.segments == 0 || cfg.words_per_segment == 0 {
        return Err(Error::Parameter("toy corpus dimensions must be positive".into()));
    }
    let dict = PhonemeDict::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = [220.0, 247.0, 262.0, 294.0, 330.0, 349.0, 392.0];
    let songs: Vec<(Vec<Vec<[&str; 2]>>, Vec<Vec<f64>>)> = (0..cfg.songs)
        .map(|_| {
            let lyr: Vec<Vec<[&str; 2]>> = (0..cfg.segments)
                .map(|_| {
                    (0..cfg.words_per_segment)
                        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
                        .collect()
                })
                .collect();
            let mel = lyr
                .iter()
                .map(|seg| seg.iter().map(|_| scale[rng.gen_range(0..scale.len())]).collect())
                .collect();
            (lyr, mel)
        })
        .collect();

    let sil = PhonemeDict::SIL;
    for s in 0..cfg.speakers {
        let speaker = format!("spk{}", s + 1);
        let formant_scale = 1.0 + 0.08 * s as f64;
        let speech_pitch = 110.0 + 60.0 * s as f64;
        let sing_ratio = if s % 2 == 0 { 1.0 } else { 1.5 };
        for (g, (lyr, mel)) in songs.iter().enumerate() {
            let song = format!("song{}", g + 1);
            let mut read = vec![(sil, 0.15)];
            let mut sing = vec![(sil, 0.2)];
            let mut notes: Vec<(f64, f64)> = Vec::new();
            let mut t = 0.2;
            for (k, (seg, seg_notes)) in lyr.iter().zip(mel).enumerate() {
                for (i, (w, &note)) in seg.iter().zip(seg_notes).enumerate() {
                    read.push((phone(w[0]), 0.07));
                    read.push((phone(w[1]), 0.18));
                    sing.push((phone(w[0]), 0.06));
                    sing.push((phone(w[1]), 0.3));
                    notes.push((t, note * sing_ratio));
                    t += 0.36;
                    if i + 1 < seg.len() {
                        read.push((sil, 0.04));
                        sing.push((sil, 0.03));
                        t += 0.03;
                    }
                }
                let gap = if k + 1 < lyr.len() { 0.3 } else { 0.2 };
                read.push((sil, 0.25));
                sing.push((sil, gap));
                t += gap;
            }
            let pitch = move |time: f64| {
                let i = notes.partition_point(|&(start, _)| start <= time);
                notes[i.saturating_sub(1)].1
            };
            let base = cfg.seed.wrapping_mul(1000) + (s * 100 + g * 2) as u64;
            let (rw, ra) = render(&read, &|t| speech_pitch - 20.0 * (t % 1.5), formant_scale, base);
            let (sw, sa) = render(&sing, &pitch, formant_scale, base + 1);
            for (side, w, a) in [("read", &rw, &ra), ("sing", &sw, &sa)] {
                let dir = root.join(&speaker).join(side);
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                write_wav(w, dir.join(format!("{song}.wav")))?;
                a.write(&dir.join(format!("{song}.txt")), &dict)?;
            }
        }
    }
    Ok(())
}
