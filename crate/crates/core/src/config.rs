//! Pipeline configuration in a flat `key = value` text format.
//!
//! `#` starts a comment. Keys not present keep their defaults; unknown or
//! repeated keys are errors.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::detector::DetectorParams;
use crate::loggabor::LogGaborBankParams;
use crate::tracker::TrackerParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: cannot parse {value:?} for {key}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
}

pub const CONFIG_KEYS: [&str; 18] = [
    "crop_size",
    "scales",
    "orientations",
    "min_wavelength",
    "scale_mult",
    "sigma_ratio",
    "d_theta_ratio",
    "pool",
    "pca_k",
    "reject_threshold",
    "diff_threshold",
    "min_area",
    "alpha",
    "gate_radius",
    "area_ratio_max",
    "max_misses",
    "box_pad",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Side of the square crop every object is resized to before filtering.
    pub crop_size: usize,
    pub bank: LogGaborBankParams,
    pub pool: usize,
    pub pca_k: usize,
    pub reject_threshold: f64,
    pub detector: DetectorParams,
    pub tracker: TrackerParams,
    /// Fraction of box width/height added on each side before cropping.
    pub box_pad: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            crop_size: 64,
            bank: LogGaborBankParams::default(),
            pool: 4,
            pca_k: 32,
            reject_threshold: FRAC_PI_4,
            detector: DetectorParams::default(),
            tracker: TrackerParams::default(),
            box_pad: 0.1,
            seed: 42,
        }
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or(ConfigError::Syntax { line })?;
            let Some(&key) = CONFIG_KEYS.iter().find(|&&k| k == key) else {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            };
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(key);
            match key {
                "crop_size" => cfg.crop_size = parse_value(line, key, value)?,
                "scales" => cfg.bank.num_scales = parse_value(line, key, value)?,
                "orientations" => cfg.bank.num_orientations = parse_value(line, key, value)?,
                "min_wavelength" => cfg.bank.min_wavelength = parse_value(line, key, value)?,
                "scale_mult" => cfg.bank.scale_mult = parse_value(line, key, value)?,
                "sigma_ratio" => cfg.bank.sigma_ratio = parse_value(line, key, value)?,
                "d_theta_ratio" => cfg.bank.d_theta_ratio = parse_value(line, key, value)?,
                "pool" => cfg.pool = parse_value(line, key, value)?,
                "pca_k" => cfg.pca_k = parse_value(line, key, value)?,
                "reject_threshold" => cfg.reject_threshold = parse_value(line, key, value)?,
                "diff_threshold" => cfg.detector.diff_threshold = parse_value(line, key, value)?,
                "min_area" => cfg.detector.min_area = parse_value(line, key, value)?,
                "alpha" => cfg.detector.alpha = parse_value(line, key, value)?,
                "gate_radius" => cfg.tracker.gate_radius = parse_value(line, key, value)?,
                "area_ratio_max" => cfg.tracker.area_ratio_max = parse_value(line, key, value)?,
                "max_misses" => cfg.tracker.max_misses = parse_value(line, key, value)?,
                "box_pad" => cfg.box_pad = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Every key, one per line, in [`CONFIG_KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let values: [String; 18] = [
            self.crop_size.to_string(),
            self.bank.num_scales.to_string(),
            self.bank.num_orientations.to_string(),
            self.bank.min_wavelength.to_string(),
            self.bank.scale_mult.to_string(),
            self.bank.sigma_ratio.to_string(),
            self.bank.d_theta_ratio.to_string(),
            self.pool.to_string(),
            self.pca_k.to_string(),
            self.reject_threshold.to_string(),
            self.detector.diff_threshold.to_string(),
            self.detector.min_area.to_string(),
            self.detector.alpha.to_string(),
            self.tracker.gate_radius.to_string(),
            self.tracker.area_ratio_max.to_string(),
            self.tracker.max_misses.to_string(),
            self.box_pad.to_string(),
            self.seed.to_string(),
        ];
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.pool == 0 {
            return invalid("pool must be at least 1".into());
        }
        if self.crop_size < 4 || !self.crop_size.is_multiple_of(self.pool) {
            return invalid(format!(
                "crop_size {} must be >= 4 and a multiple of pool {}",
                self.crop_size, self.pool
            ));
        }
        if self.pca_k == 0 {
            return invalid("pca_k must be at least 1".into());
        }
        if !(self.reject_threshold > 0.0 && self.reject_threshold <= std::f64::consts::FRAC_PI_2) {
            return invalid(format!("reject_threshold {} not in (0, pi/2]", self.reject_threshold));
        }
        if !(self.box_pad >= 0.0 && self.box_pad.is_finite()) {
            return invalid(format!("box_pad {} must be >= 0", self.box_pad));
        }
        self.bank.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.bank.center_frequency(0) > 0.5 {
            return invalid("finest center frequency exceeds 0.5".into());
        }
        self.detector.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.tracker.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.crop_size, 64);
        assert_eq!((c.bank.num_scales, c.bank.num_orientations), (4, 6));
        assert_eq!(c.pool, 4);
        assert_eq!(c.tracker.gate_radius, 40.0);
        assert_eq!(c.detector.min_area, 60);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_with_comments_and_defaults() {
        let c = PipelineConfig::parse("# demo\ncrop_size = 32 # smaller\n\n seed=7\nsigma_ratio = 0.745\n").unwrap();
        assert_eq!(c.crop_size, 32);
        assert_eq!(c.seed, 7);
        assert_eq!(c.bank.sigma_ratio, 0.745);
        assert_eq!(c.pool, 4);
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::default();
        c.reject_threshold = 0.7123456789012345;
        c.detector.alpha = 1.0 / 3.0;
        let text = c.to_text();
        assert_eq!(text.lines().count(), 18);
        assert_eq!(PipelineConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn errors() {
        assert_eq!(PipelineConfig::parse("crop_size 64"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(PipelineConfig::parse("colour = 1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(
            PipelineConfig::parse("pool = 2\npool = 4"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(PipelineConfig::parse("pool = four"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(PipelineConfig::parse("crop_size = 30"), Err(ConfigError::Invalid(_))));
        assert!(matches!(PipelineConfig::parse("min_wavelength = 1"), Err(ConfigError::Invalid(_))));
        assert!(matches!(PipelineConfig::parse("diff_threshold = 1.5"), Err(ConfigError::Invalid(_))));
    }
}
