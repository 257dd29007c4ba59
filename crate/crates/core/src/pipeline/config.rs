//! Flat `[section]` + `key = value` configuration. Every training
//! hyperparameter is a config default, overridable from a file.

use std::collections::BTreeMap;
use std::path::Path;

use super::PipelineError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    map: BTreeMap<String, String>,
}

/// Corpus/training scale. Desk runs in minutes on a laptop CPU; paper
/// reproduces the full-size recipe (128×128 frames, 500/100-epoch training).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(format!("unknown scale {other:?} (want desk|paper)")),
        }
    }
}

impl Config {
    fn from_pairs(pairs: &[(&str, &str)]) -> Config {
        Config {
            map: pairs
                .iter()
                .map(|&(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn defaults(scale: Scale) -> Config {
        match scale {
            Scale::Desk => Config::from_pairs(&[
                ("corpus.normal_scenarios", "6"),
                ("corpus.abnormal_scenarios", "6"),
                ("corpus.imu_samples", "600"),
                ("corpus.frames", "60"),
                ("corpus.frame_size", "32"),
                ("imu.epochs", "8"),
                ("imu.lr", "0.01"),
                ("imu.batch", "1"),
                ("vision.codec_epochs", "10"),
                ("vision.forecaster_epochs", "6"),
                ("vision.lr", "0.001"),
                ("vision.decay_at", "5,8"),
                ("vision.decay_factor", "10"),
                ("vision.cgan_epochs", "3"),
                ("vision.cgan_lr", "0.00003"),
                ("vision.lambda_pred", "100"),
                ("vision.lambda_adv", "1"),
                ("split.vision_threshold", "100"),
                ("split.vision_test", "100"),
                ("calibrate.confidence", "0.95"),
            ]),
            Scale::Paper => Config::from_pairs(&[
                ("corpus.normal_scenarios", "6"),
                ("corpus.abnormal_scenarios", "6"),
                ("corpus.imu_samples", "600"),
                ("corpus.frames", "60"),
                ("corpus.frame_size", "128"),
                ("imu.epochs", "500"),
                ("imu.lr", "0.01"),
                ("imu.batch", "1"),
                ("vision.codec_epochs", "100"),
                ("vision.forecaster_epochs", "100"),
                ("vision.lr", "0.001"),
                ("vision.decay_at", "50,80"),
                ("vision.decay_factor", "10"),
                ("vision.cgan_epochs", "20"),
                ("vision.cgan_lr", "0.00003"),
                ("vision.lambda_pred", "100"),
                ("vision.lambda_adv", "1"),
                ("split.vision_threshold", "100"),
                ("split.vision_test", "100"),
                ("calibrate.confidence", "0.95"),
            ]),
        }
    }

    /// Parses `[section]` / `key = value` text; keys become `section.key`.
    pub fn parse(text: &str) -> Result<Config, PipelineError> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::MalformedConfig(format!("line {}: {raw:?}", idx + 1))
            })?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            map.insert(key, v.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn load(path: &Path) -> Result<Config, PipelineError> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    /// Overlays `other` on top of `self` (other wins).
    pub fn merged_with(mut self, other: &Config) -> Config {
        for (k, v) in &other.map {
            self.map.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn get(&self, key: &str) -> Result<&str, PipelineError> {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| PipelineError::MissingConfigKey(key.to_string()))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, PipelineError> {
        self.get(key)?
            .parse()
            .map_err(|_| PipelineError::MalformedConfig(format!("{key} is not a number")))
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, PipelineError> {
        self.get(key)?
            .parse()
            .map_err(|_| PipelineError::MalformedConfig(format!("{key} is not an integer")))
    }

    /// Comma-separated integer list; empty value means empty list.
    pub fn get_usize_list(&self, key: &str) -> Result<Vec<usize>, PipelineError> {
        let raw = self.get(key)?;
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|tok| {
                tok.trim()
                    .parse()
                    .map_err(|_| PipelineError::MalformedConfig(format!("{key}: bad entry {tok:?}")))
            })
            .collect()
    }

    /// Canonical text form, grouped by section; embedded in checkpoints and
    /// reproducible byte-for-byte.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut last_section = String::new();
        for (k, v) in &self.map {
            let (section, key) = k.split_once('.').unwrap_or(("", k.as_str()));
            if section != last_section {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                last_section = section.to_string();
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_reparses_identically() {
        let cfg = Config::defaults(Scale::Desk);
        let back = Config::parse(&cfg.echo()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn missing_key_names_the_key() {
        let cfg = Config::defaults(Scale::Desk);
        match cfg.get_f64("vision.nonexistent_knob") {
            Err(PipelineError::MissingConfigKey(k)) => {
                assert_eq!(k, "vision.nonexistent_knob");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_overrides_defaults() {
        let over = Config::parse("[imu]\nepochs = 3\n").unwrap();
        let cfg = Config::defaults(Scale::Desk).merged_with(&over);
        assert_eq!(cfg.get_usize("imu.epochs").unwrap(), 3);
        assert_eq!(cfg.get_usize("corpus.frames").unwrap(), 60);
    }

    #[test]
    fn paper_scale_has_recipe_hyperparameters() {
        let cfg = Config::defaults(Scale::Paper);
        assert_eq!(cfg.get_usize("imu.epochs").unwrap(), 500);
        assert_eq!(cfg.get_f64("imu.lr").unwrap(), 0.01);
        assert_eq!(cfg.get_usize("imu.batch").unwrap(), 1);
        assert_eq!(cfg.get_usize("corpus.frame_size").unwrap(), 128);
        assert_eq!(cfg.get_usize("vision.codec_epochs").unwrap(), 100);
        assert_eq!(cfg.get_f64("vision.lr").unwrap(), 1e-3);
        assert_eq!(cfg.get_usize_list("vision.decay_at").unwrap(), vec![50, 80]);
        assert_eq!(cfg.get_f64("calibrate.confidence").unwrap(), 0.95);
    }

    #[test]
    fn bad_lines_are_rejected() {
        assert!(Config::parse("just words\n").is_err());
        assert!(Config::parse("[imu]\nepochs: 4\n").is_err());
    }
}
