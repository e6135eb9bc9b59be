//! Run configuration: JSON file format plus flag overrides. Parsing is
//! strict (unknown keys rejected) and the format round-trips through
//! serialization.

use carnot_core::quad::{EstimatorKind, QuadratureSpec};
use carnot_core::verify::Tolerances;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlgebraSpec {
    /// Preset name: `heisenberg-N`, `free-step2-M`, `abelian-M`.
    Preset(String),
    /// JSON structure-constant file.
    File { file: PathBuf },
}

impl Default for AlgebraSpec {
    fn default() -> Self {
        AlgebraSpec::Preset("heisenberg-1".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceSpec {
    /// `euclidean-ball:R`, `gauge-ball:R`, `cylinder:R`.
    Preset(String),
    Custom {
        phi: String,
        #[serde(rename = "box")]
        bbox: Vec<(f64, f64)>,
        #[serde(default)]
        tau_char: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "default_order")]
    pub order: u32,
}

fn default_order() -> u32 {
    1
}

/// Quadrature plan with an optional estimator; `None` selects the
/// surface-appropriate default (parametric on Euclidean balls, thin-shell
/// elsewhere; volumes always Monte Carlo unless tensor-grid is forced).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub sample_count: u64,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub tau_char: f64,
    pub estimator: Option<EstimatorKind>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            sample_count: 1_000_000,
            seed: 7,
            epsilon: None,
            tau_char: 1e-6,
            estimator: None,
        }
    }
}

impl QuadConfig {
    pub fn to_spec(&self, estimator: EstimatorKind) -> QuadratureSpec {
        QuadratureSpec {
            sample_count: self.sample_count,
            seed: self.seed,
            epsilon: self.epsilon,
            tau_char: self.tau_char,
            estimator: self.estimator.unwrap_or(estimator),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algebra: AlgebraSpec,
    pub surface: Option<SurfaceSpec>,
    pub u: Option<String>,
    pub bump: Option<BumpSpec>,
    pub family: Option<Vec<String>>,
    pub radii: Option<Vec<f64>>,
    pub quadrature: QuadConfig,
    pub suites: Vec<String>,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algebra: AlgebraSpec::default(),
            surface: None,
            u: None,
            bump: None,
            family: None,
            radii: None,
            quadrature: QuadConfig::default(),
            suites: vec!["all".into()],
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
