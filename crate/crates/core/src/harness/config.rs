use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::spectral::default_theta;
use crate::width::Profile;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Distortion angle rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaRule {
    /// `"k"`: `theta = h ln(1/h)`.
    Named(String),
    /// A fixed angle.
    Fixed(f64),
    /// `{"k_multiple": c}`: `theta = c h ln(1/h)`.
    Multiple { k_multiple: f64 },
}

impl Default for ThetaRule {
    fn default() -> Self {
        ThetaRule::Named("k".into())
    }
}

impl ThetaRule {
    pub fn theta(&self, h: f64) -> Result<f64> {
        match self {
            ThetaRule::Named(s) if s == "k" => Ok(default_theta(h)),
            ThetaRule::Named(s) => Err(Error::Config(format!("unknown theta rule {s:?} (use \"k\", a number or {{\"k_multiple\": c}})"))),
            ThetaRule::Fixed(t) => Ok(*t),
            ThetaRule::Multiple { k_multiple } => Ok(k_multiple * default_theta(h)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    #[serde(default = "one")]
    pub n: u32,
    #[serde(default = "quintic")]
    pub profile: String,
}

fn one() -> u32 {
    1
}

fn quintic() -> String {
    "quintic".into()
}

impl Default for CutoffConfig {
    fn default() -> Self {
        CutoffConfig { n: 1, profile: quintic() }
    }
}

impl CutoffConfig {
    pub fn profile(&self) -> Result<Profile> {
        self.profile.parse()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub records: Option<String>,
    pub json: Option<String>,
}

/// Sweep description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Preset name or path to a model JSON file.
    pub model: String,
    /// Strictly descending.
    pub h: Vec<f64>,
    #[serde(default)]
    pub theta: ThetaRule,
    /// Nodes per `h` of grid spacing: `dx <= h / points_per_h`.
    #[serde(default = "four")]
    pub points_per_h: f64,
    /// Fixed interior node count; overrides `points_per_h`.
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default = "r0")]
    pub r0: f64,
    #[serde(default = "box_l")]
    pub l: f64,
    #[serde(default = "tol")]
    pub tol: f64,
    /// Parallel workers; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cutoff: CutoffConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

fn four() -> f64 {
    4.0
}

fn r0() -> f64 {
    3.0
}

fn box_l() -> f64 {
    7.0
}

fn tol() -> f64 {
    1e-13
}

/// Shown with configuration errors.
pub const CONFIG_SCHEMA: &str = r#"sweep config (JSON):
{
  "model": "canonical-1d",            preset name or model file path
  "h": [0.12, 0.11, 0.10],            strictly descending, all > 0
  "theta": "k",                       "k", a number, or {"k_multiple": c}
  "points_per_h": 4,                  grid spacing <= h / points_per_h (>= 4)
  "grid_points": null,                fixed interior node count (optional)
  "r0": 3.0, "l": 7.0,                undistorted radius, box half-width
  "tol": 1e-13,                       eigenvalue stopping tolerance (>= 1e-13)
  "workers": 0,                       0 = all cores
  "seed": 0,                          seed for perturbed-shift retries
  "cutoff": {"n": 1, "profile": "quintic"},   or "smooth"
  "outputs": {"records": "records.csv", "json": "records.json"}
}"#;

impl SweepConfig {
    pub fn new(model: impl Into<String>, h: Vec<f64>) -> Self {
        SweepConfig {
            model: model.into(),
            h,
            theta: ThetaRule::default(),
            points_per_h: 4.0,
            grid_points: None,
            r0: 3.0,
            l: 7.0,
            tol: 1e-13,
            workers: 0,
            seed: 0,
            cutoff: CutoffConfig::default(),
            outputs: OutputConfig::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.is_empty() {
            return Err(Error::Config("h list is empty".into()));
        }
        if self.h.iter().any(|&h| !(h > 0.0 && h < 1.0)) {
            return Err(Error::Config("every h must lie in (0, 1)".into()));
        }
        if self.h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("h values must be strictly descending".into()));
        }
        if !(self.points_per_h >= 4.0) {
            return Err(Error::Config("points_per_h must be at least 4".into()));
        }
        if !(self.tol >= 1e-13) {
            return Err(Error::Config("tol must be at least 1e-13".into()));
        }
        for &h in &self.h {
            self.theta.theta(h)?;
        }
        self.cutoff.profile()?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelConfig> {
        ModelConfig::load(&self.model)
    }

    /// Interior node count at `h`.
    pub fn nodes(&self, h: f64) -> usize {
        match self.grid_points {
            Some(m) => m,
            None => ((2.0 * self.l / (h / self.points_per_h)).ceil() as usize + 1).max(500),
        }
    }
}
