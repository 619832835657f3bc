//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::{Alignment, SampleConfig};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant};
use crate::synth::GriffinLimConfig;
use crate::train::TrainConfig;

/// Every recognised key with its default value.
pub const KEYS: [(&str, &str); 22] = [
    ("lr0", "0.002"),
    ("lr_decay", "0.92"),
    ("epochs", "14"),
    ("iters_per_epoch", "1000"),
    ("batch", "16"),
    ("beta1", "0.9"),
    ("beta2", "0.999"),
    ("eps", "1e-8"),
    ("lambda", "variant"),
    ("seed", "0"),
    ("augment", "true"),
    ("max_shift", "1.0"),
    ("sum_mse", "false"),
    ("alignment", "uniform"),
    ("max_frames", "none"),
    ("widths", "32,64,128"),
    ("dp_hidden", "64"),
    ("min_words", "3"),
    ("segment_pause", "0.1"),
    ("test_song", "last"),
    ("gl_iters", "60"),
    ("gl_power", "1.2"),
];

/// Parsed settings; later [`Settings::set`] calls override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                file: file.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            s.set(key.trim(), value.trim()).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Config(format!("bad value `{v}` for `{key}`"))),
            })
            .transpose()
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.typed("seed")?.unwrap_or(0))
    }

    pub fn train_config(&self, variant: Variant) -> Result<TrainConfig> {
        let mut c = TrainConfig::for_variant(variant);
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.typed(stringify!($field))? {
                    c.$field = v;
                }
            };
        }
        take!(lr0);
        take!(lr_decay);
        take!(epochs);
        take!(iters_per_epoch);
        take!(batch);
        take!(beta1);
        take!(beta2);
        take!(eps);
        take!(lambda);
        take!(seed);
        take!(max_shift);
        if let Some(v) = self.flag("augment")? {
            c.augment = v;
        }
        if let Some(v) = self.flag("sum_mse")? {
            c.sum_mse = v;
        }
        match self.get("alignment") {
            None | Some("uniform") => {}
            Some("phsync") => c.alignment = Alignment::PhSync,
            Some(v) => return Err(Error::Config(format!("bad value `{v}` for `alignment`"))),
        }
        match self.get("max_frames") {
            None | Some("none") => {}
            Some(_) => c.max_frames = self.typed("max_frames")?,
        }
        c.validate()?;
        Ok(c)
    }

    pub fn model_config(&self, variant: Variant) -> Result<ModelConfig> {
        let mut c = ModelConfig::full(variant).with_seed(self.seed()?);
        if let Some(w) = self.get("widths") {
            let widths: Vec<usize> = w
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad value `{w}` for `widths`")))?;
            c.widths = widths
                .try_into()
                .map_err(|_| Error::Config("`widths` needs three entries".into()))?;
        }
        if let Some(h) = self.typed("dp_hidden")? {
            c.dp_hidden = h;
        }
        Ok(c)
    }

    pub fn sample_config(&self) -> Result<SampleConfig> {
        let mut c = SampleConfig::default();
        if let Some(v) = self.typed("min_words")? {
            c.min_words = v;
        }
        if let Some(v) = self.typed("segment_pause")? {
            c.segment_pause = v;
        }
        match self.get("test_song") {
            None | Some("last") => {}
            Some(song) => c.test_song = Some(song.to_string()),
        }
        Ok(c)
    }

    pub fn griffin_lim(&self) -> Result<GriffinLimConfig> {
        let mut c = GriffinLimConfig {
            seed: self.seed()?,
            ..GriffinLimConfig::default()
        };
        if let Some(v) = self.typed("gl_iters")? {
            c.iters = v;
        }
        if let Some(v) = self.typed("gl_power")? {
            c.power = v;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_training_defaults() {
        let s = Settings::default();
        assert_eq!(s.train_config(Variant::PMtl).unwrap(), TrainConfig::for_variant(Variant::PMtl));
        assert_eq!(s.model_config(Variant::B1).unwrap(), ModelConfig::full(Variant::B1));
        assert_eq!(s.sample_config().unwrap(), SampleConfig::default());
    }

    #[test]
    fn documented_defaults_round_trip() {
        let text: String = KEYS
            .iter()
            .filter(|(_, v)| !matches!(*v, "variant" | "none" | "last"))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let s = Settings::parse(&text, "defaults").unwrap();
        assert_eq!(s.train_config(Variant::PMse).unwrap(), TrainConfig::for_variant(Variant::PMse));
        assert_eq!(s.model_config(Variant::PMse).unwrap(), ModelConfig::full(Variant::PMse));
        assert_eq!(s.griffin_lim().unwrap(), GriffinLimConfig::default());
    }

    #[test]
    fn comments_and_overrides() {
        let mut s = Settings::parse("# run\nepochs = 3  # short\n\nalignment = phsync\n", "c").unwrap();
        s.set("epochs", "5").unwrap();
        let c = s.train_config(Variant::PMse).unwrap();
        assert_eq!(c.epochs, 5);
        assert_eq!(c.alignment, Alignment::PhSync);
    }

    #[test]
    fn errors_carry_the_line() {
        match Settings::parse("epochs = 1\nnonsense\n", "run.cfg") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match Settings::parse("\n\nvelocity = 3\n", "run.cfg") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("velocity"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_are_config_errors() {
        let s = Settings::parse("batch = many\n", "c").unwrap();
        assert!(matches!(s.train_config(Variant::PMse), Err(Error::Config(_))));
        let s = Settings::parse("widths = 8,16\n", "c").unwrap();
        assert!(matches!(s.model_config(Variant::PMse), Err(Error::Config(_))));
        let s = Settings::parse("epochs = 0\n", "c").unwrap();
        assert!(matches!(s.train_config(Variant::PMse), Err(Error::Config(_))));
    }
}
