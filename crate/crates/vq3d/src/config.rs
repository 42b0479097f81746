//! Pipeline configuration file (TOML).
//!
//! ```toml
//! seed = 0
//! jobs = 1
//!
//! [registration]
//! method = "per_frame_min"      # or "least_squares_sim3"
//! lambda = 1.0                  # meters per radian
//! # min_common = 3              # default depends on the method
//! filter_threshold = "none"     # or a reprojection error in pixels
//! frame_pattern = 'frame_(\d+)'
//!
//! [localization]
//! aggregation = "last"          # "average", "median"
//!
//! [evaluation]
//! l2_max = 6.0                  # meters
//! angle_max = 0.52              # radians
//! space = "query_frame"         # or "world"
//!
//! [blur]
//! window = 10
//! threshold = 0.0015
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use vq3d_core::evaluation::{MetricThresholds, Space};
use vq3d_core::frames::Aggregation;
use vq3d_core::registration::{Method, RegistrationOptions};

use crate::error::{read_string, Error, Result};
use crate::formats::{FramePattern, DEFAULT_FRAME_PATTERN};

/// A reprojection-error threshold, or no filtering at all.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Threshold(pub Option<f64>);

impl std::str::FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            return Ok(Threshold(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 => Ok(Threshold(Some(v))),
            _ => Err(format!("expected `none` or a non-negative number, got `{s}`")),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            None => s.serialize_str("none"),
            Some(v) => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Threshold(Some(v))),
            Raw::Int(v) => Ok(Threshold(Some(v as f64))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegistrationSection {
    pub method: Method,
    pub lambda: f64,
    pub min_common: Option<usize>,
    pub filter_threshold: Threshold,
    pub frame_pattern: String,
}

impl Default for RegistrationSection {
    fn default() -> Self {
        let o = RegistrationOptions::default();
        Self { method: o.method, lambda: o.lambda, min_common: o.min_common, filter_threshold: Threshold(None), frame_pattern: DEFAULT_FRAME_PATTERN.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalizationSection {
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub l2_max: f64,
    pub angle_max: f64,
    pub space: Space,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let t = MetricThresholds::default();
        Self { l2_max: t.l2_max, angle_max: t.angle_max, space: t.space }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlurSection {
    /// Frames in the sharp window.
    pub window: usize,
    /// Minimum variance of Laplacian over the window, intensities in `[0, 1]`.
    pub threshold: f64,
}

impl Default for BlurSection {
    fn default() -> Self {
        Self { window: 10, threshold: 0.0015 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: usize,
    pub registration: RegistrationSection,
    pub localization: LocalizationSection,
    pub evaluation: EvaluationSection,
    pub blur: BlurSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            registration: RegistrationSection::default(),
            localization: LocalizationSection::default(),
            evaluation: EvaluationSection::default(),
            blur: BlurSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_string(path).map_err(|e| Error::Config(e.to_string()))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim_start_matches("config error: "))))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        let r = &self.registration;
        if !(r.lambda.is_finite() && r.lambda >= 0.0) {
            return bad(format!("registration.lambda must be finite and non-negative, got {}", r.lambda));
        }
        if r.min_common == Some(0) {
            return bad("registration.min_common must be at least 1".into());
        }
        if let Some(t) = r.filter_threshold.0 {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("registration.filter_threshold must be `none` or non-negative, got {t}"));
            }
        }
        FramePattern::new(&r.frame_pattern)?;
        self.thresholds().validate().map_err(|e| Error::Config(format!("evaluation: {e}")))?;
        if self.blur.window == 0 {
            return bad("blur.window must be at least 1".into());
        }
        if !(self.blur.threshold.is_finite() && self.blur.threshold >= 0.0) {
            return bad(format!("blur.threshold must be finite and non-negative, got {}", self.blur.threshold));
        }
        Ok(())
    }

    pub fn registration_options(&self) -> RegistrationOptions {
        RegistrationOptions { method: self.registration.method, lambda: self.registration.lambda, min_common: self.registration.min_common }
    }

    pub fn thresholds(&self) -> MetricThresholds {
        MetricThresholds { l2_max: self.evaluation.l2_max, angle_max: self.evaluation.angle_max, space: self.evaluation.space }
    }

    pub fn frame_pattern(&self) -> Result<FramePattern> {
        FramePattern::new(&self.registration.frame_pattern)
    }
}
