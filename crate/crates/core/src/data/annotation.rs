use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::dict::PhonemeDict;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhoneInterval {
    pub start: f64,
    pub end: f64,
    pub phone: usize,
}

impl PhoneInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_pause(&self) -> bool {
        PhonemeDict::is_pause(self.phone)
    }
}

/// Time-ordered, non-overlapping phone intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhoneAnnotation {
    pub intervals: Vec<PhoneInterval>,
}

const TIME_SLACK: f64 = 1e-6;

impl PhoneAnnotation {
    pub fn new(intervals: Vec<PhoneInterval>) -> Result<Self> {
        let a = PhoneAnnotation { intervals };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, iv) in self.intervals.iter().enumerate() {
            if !(iv.start.is_finite() && iv.end.is_finite()) || iv.start < 0.0 || iv.end <= iv.start {
                return Err(Error::Parameter(format!(
                    "interval {i} [{}, {}] is empty or negative",
                    iv.start, iv.end
                )));
            }
            if i > 0 && iv.start < self.intervals[i - 1].end - TIME_SLACK {
                return Err(Error::Parameter(format!("interval {i} overlaps its predecessor")));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.intervals.last().map_or(0.0, |iv| iv.end)
    }

    /// Non-pause phones in order.
    pub fn spoken(&self) -> Vec<PhoneInterval> {
        self.intervals.iter().filter(|iv| !iv.is_pause()).copied().collect()
    }

    /// Phone covering time `t`, or silence outside every interval.
    pub fn phone_at(&self, t: f64) -> usize {
        let i = self.intervals.partition_point(|iv| iv.end <= t);
        match self.intervals.get(i) {
            Some(iv) if iv.start <= t => iv.phone,
            _ => PhonemeDict::SIL,
        }
    }

    /// Intervals clipped to `[start, end)` and shifted so that `start` is zero.
    pub fn window(&self, start: f64, end: f64) -> PhoneAnnotation {
        let intervals = self
            .intervals
            .iter()
            .filter(|iv| iv.end > start + TIME_SLACK && iv.start < end - TIME_SLACK)
            .map(|iv| PhoneInterval {
                start: iv.start.max(start) - start,
                end: iv.end.min(end) - start,
                phone: iv.phone,
            })
            .collect();
        PhoneAnnotation { intervals }
    }

    /// Parses `start end phone` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, file: &str, dict: &PhonemeDict) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            file: file.to_string(),
            line,
            message,
        };
        let mut intervals: Vec<PhoneInterval> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err(line, format!("expected `start end phone`, got `{body}`")));
            }
            let time = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line, format!("bad time `{s}`")))
            };
            let (start, end) = (time(fields[0])?, time(fields[1])?);
            let phone = dict
                .index(fields[2])
                .ok_or_else(|| err(line, format!("unknown phone `{}`", fields[2])))?;
            if start < 0.0 || end <= start {
                return Err(err(line, format!("interval [{start}, {end}] is empty or negative")));
            }
            if let Some(prev) = intervals.last() {
                if start < prev.end - TIME_SLACK {
                    return Err(err(line, format!("starts at {start} before previous end {}", prev.end)));
                }
            }
            intervals.push(PhoneInterval { start, end, phone });
        }
        Ok(PhoneAnnotation { intervals })
    }

    pub fn read(path: &Path, dict: &PhonemeDict) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string(), dict)
    }

    pub fn to_text(&self, dict: &PhonemeDict) -> String {
        let mut s = String::new();
        for iv in &self.intervals {
            let name = dict.name(iv.phone).unwrap_or("SIL").to_ascii_lowercase();
            let _ = writeln!(s, "{:.4} {:.4} {name}", iv.start, iv.end);
        }
        s
    }

    pub fn write(&self, path: &Path, dict: &PhonemeDict) -> Result<()> {
        fs::write(path, self.to_text(dict)).map_err(|e| Error::io(path, e))
    }
}
