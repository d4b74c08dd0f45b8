//! Study configuration with the published defaults, loadable from a flat
//! key-value file (`key = value`, `#` comments).

use crate::vectors::Normalization;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Strength,
    Style,
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Study::Strength => write!(f, "strength"),
            Study::Style => write!(f, "style"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: Study,
    /// Pattern vector dimension.
    pub n: usize,
    /// PCA dimension for the classifier inputs. Strength defaults to the
    /// reference count, style to 23; clamped to what the data supports.
    pub m: Option<usize>,
    /// PCA dimension for the Bayes classifier input.
    pub bayes_dims: usize,
    pub normalization: Normalization,
    /// Contiguity features off reduces pattern diversity on small samples;
    /// the strength study defaults to true, style to false.
    pub no_contiguity: Option<bool>,
    pub seed: u64,
    pub dict_min_count: u64,
    pub radii: (u8, u8),
    pub folds: usize,
    pub runs: usize,
    /// Game sample sizes evaluated by the strength protocol.
    pub g_values: Vec<usize>,
    /// Repetitions per (rank, G) cell of the strength protocol.
    pub repetitions: usize,
    pub nn_hidden: usize,
    pub nn_target_error: f64,
    pub nn_max_iters: usize,
    pub bayes_class_width: f64,
    pub xnorm_c: f64,
}

impl StudyConfig {
    pub fn strength() -> StudyConfig {
        StudyConfig {
            study: Study::Strength,
            n: 500,
            m: None,
            bayes_dims: 10,
            normalization: Normalization::Linear,
            no_contiguity: None,
            seed: 0,
            dict_min_count: 20,
            radii: (2, 9),
            folds: 5,
            runs: 200,
            g_values: vec![2, 9, 17, 43, 85],
            repetitions: 50,
            nn_hidden: 35,
            nn_target_error: 0.0005,
            nn_max_iters: 1000,
            bayes_class_width: 10.0 / 7.0,
            xnorm_c: 6.0,
        }
    }

    pub fn style() -> StudyConfig {
        StudyConfig {
            study: Study::Style,
            m: Some(23),
            nn_hidden: 30,
            nn_target_error: 0.0003,
            ..StudyConfig::strength()
        }
    }

    pub fn for_study(study: Study) -> StudyConfig {
        match study {
            Study::Strength => StudyConfig::strength(),
            Study::Style => StudyConfig::style(),
        }
    }

    pub fn contiguity_disabled(&self) -> bool {
        self.no_contiguity.unwrap_or(self.study == Study::Strength)
    }
}

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        message: message.into(),
    })
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((key, value)) => {
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
            None => return fail(format!("line {}: expected 'key = value'", i + 1)),
        }
    }
    Ok(map)
}

impl StudyConfig {
    /// Read a config file; `study` must be present unless a base is given.
    pub fn load(path: &Path) -> Result<StudyConfig, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError { message: format!("cannot read {}: {}", path.display(), e) })?;
        let map = parse_key_values(&text)?;
        let study = match map.get("study").map(|s| s.as_str()) {
            Some("strength") => Study::Strength,
            Some("style") => Study::Style,
            Some(other) => return fail(format!("unknown study '{}'", other)),
            None => return fail("missing 'study' key"),
        };
        let mut config = StudyConfig::for_study(study);
        config.apply(&map)?;
        Ok(config)
    }

    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (key, value) in map {
            match key.as_str() {
                "study" => {}
                "n" => self.n = parse(key, value)?,
                "m" => self.m = Some(parse(key, value)?),
                "bayes_dims" => self.bayes_dims = parse(key, value)?,
                "normalization" => {
                    self.normalization = Normalization::parse(value)
                        .ok_or(ConfigError { message: format!("bad normalization '{}'", value) })?
                }
                "no_contiguity" => self.no_contiguity = Some(parse(key, value)?),
                "seed" => self.seed = parse(key, value)?,
                "dict_min_count" => self.dict_min_count = parse(key, value)?,
                "radii" => {
                    let (lo, hi) = value
                        .split_once("..")
                        .ok_or(ConfigError { message: "radii must be 'lo..hi'".to_string() })?;
                    self.radii = (parse(key, lo)?, parse(key, hi)?);
                }
                "folds" => self.folds = parse(key, value)?,
                "runs" => self.runs = parse(key, value)?,
                "g_values" => {
                    self.g_values = value
                        .split(',')
                        .map(|v| parse(key, v.trim()))
                        .collect::<Result<_, _>>()?
                }
                "repetitions" => self.repetitions = parse(key, value)?,
                "nn_hidden" => self.nn_hidden = parse(key, value)?,
                "nn_target_error" => self.nn_target_error = parse(key, value)?,
                "nn_max_iters" => self.nn_max_iters = parse(key, value)?,
                "bayes_class_width" => self.bayes_class_width = parse(key, value)?,
                "xnorm_c" => self.xnorm_c = parse(key, value)?,
                other => return fail(format!("unknown config key '{}'", other)),
            }
        }
        Ok(())
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError {
        message: format!("bad value '{}' for key '{}'", value, key),
    })
}
