//! Random word-level annotations and a brute-force enumeration of the word
//! runs they should yield.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use speech2sing::data::{PhonemeDict, PhoneAnnotation, PhoneInterval};

pub const SEGMENT_PAUSE: f64 = 0.1;

/// What separates two consecutive words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Separator {
    ShortPause(f64),
    LongPause(f64),
    /// Unannotated gap.
    Gap(f64),
}

impl Separator {
    pub fn splits_segment(self) -> bool {
        match self {
            Separator::ShortPause(d) | Separator::LongPause(d) | Separator::Gap(d) => {
                d >= SEGMENT_PAUSE
            }
        }
    }

    fn random(rng: &mut ChaCha8Rng) -> Self {
        match rng.gen_range(0..5) {
            0 | 1 => Separator::ShortPause(rng.gen_range(0.02..0.08)),
            2 | 3 => Separator::LongPause(rng.gen_range(0.12..0.5)),
            _ if rng.gen_bool(0.5) => Separator::Gap(rng.gen_range(0.01..0.08)),
            _ => Separator::Gap(rng.gen_range(0.12..0.3)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WordLayout {
    /// Phone indices of each word.
    pub words: Vec<Vec<usize>>,
    /// `separators[k]` sits between word `k` and word `k + 1`.
    pub separators: Vec<Separator>,
}

impl WordLayout {
    pub fn random(rng: &mut ChaCha8Rng, max_words: usize) -> Self {
        let n = rng.gen_range(1..=max_words);
        let words = (0..n)
            .map(|_| {
                (0..rng.gen_range(1..=3))
                    .map(|_| rng.gen_range(0..PhonemeDict::SIL))
                    .collect()
            })
            .collect();
        let separators = (1..n).map(|_| Separator::random(rng)).collect();
        WordLayout { words, separators }
    }

    /// Lays the words out in time with random phone durations, framed by
    /// silence on both ends.
    pub fn annotation(&self, rng: &mut ChaCha8Rng) -> PhoneAnnotation {
        let mut intervals = Vec::new();
        let mut t = 0.0;
        let push = |intervals: &mut Vec<PhoneInterval>, t: &mut f64, d: f64, phone: usize| {
            intervals.push(PhoneInterval {
                start: *t,
                end: *t + d,
                phone,
            });
            *t += d;
        };
        push(&mut intervals, &mut t, 0.3, PhonemeDict::SIL);
        for (k, word) in self.words.iter().enumerate() {
            for &p in word {
                push(&mut intervals, &mut t, rng.gen_range(0.04..0.3), p);
            }
            match self.separators.get(k) {
                Some(Separator::ShortPause(d)) | Some(Separator::LongPause(d)) => {
                    let pause = if rng.gen_bool(0.8) {
                        PhonemeDict::SIL
                    } else {
                        PhonemeDict::INH
                    };
                    push(&mut intervals, &mut t, *d, pause)
                }
                Some(Separator::Gap(d)) => t += d,
                None => {}
            }
        }
        push(&mut intervals, &mut t, 0.3, PhonemeDict::SIL);
        PhoneAnnotation::new(intervals).expect("valid synthetic annotation")
    }

    /// Every inclusive word range of at least `min_words` words that no
    /// segment-ending separator cuts through.
    pub fn brute_force_runs(&self, min_words: usize) -> BTreeSet<(usize, usize)> {
        let n = self.words.len();
        let mut runs = BTreeSet::new();
        for first in 0..n {
            for last in first..n {
                let long_enough = last - first + 1 >= min_words;
                let unbroken = (first..last).all(|k| !self.separators[k].splits_segment());
                if long_enough && unbroken {
                    runs.insert((first, last));
                }
            }
        }
        runs
    }
}
