use std::fmt;

use excursion_core::asymptotics::{JointTailWindow, WindowKind};
use excursion_core::estimators::TiltPolicy;
use excursion_core::excursion::DEFAULT_MAX_STEPS;
use excursion_core::{Execution, Family, ModelSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    AreaTail,
    TauTail,
    MaxTail,
    JointTail,
    SigmaLaw,
    BoundsGrid,
    ClassCheck,
    OracleDp,
    Headline,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::AreaTail => "area_tail",
            Kind::TauTail => "tau_tail",
            Kind::MaxTail => "max_tail",
            Kind::JointTail => "joint_tail",
            Kind::SigmaLaw => "sigma_law",
            Kind::BoundsGrid => "bounds_grid",
            Kind::ClassCheck => "class_check",
            Kind::OracleDp => "oracle_dp",
            Kind::Headline => "headline",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Naive,
    IsMixture,
}

/// Importance-sampling settings; the threshold defaults to a quarter of the
/// one-jump level (`√(2ax)`, `a t` or `y`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsSettings {
    #[serde(default = "default_weight")]
    pub mixture_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_threshold: Option<f64>,
    #[serde(default)]
    pub policy: TiltPolicy,
}

fn default_weight() -> f64 {
    0.05
}

impl Default for IsSettings {
    fn default() -> Self {
        Self {
            mixture_weight: default_weight(),
            tilt_threshold: None,
            policy: TiltPolicy::default(),
        }
    }
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_c_env() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}

fn default_eps() -> f64 {
    0.1
}

fn default_k_max() -> usize {
    20
}

fn default_window() -> JointTailWindow {
    JointTailWindow {
        kind: WindowKind::RegvarA,
        epsilon: 0.5,
        r: 1.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kind: Kind,
    pub seed: u64,
    /// Monte Carlo sample size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Sample size of the `E τ` pass; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_tau_n: Option<u64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub x_grid: Vec<f64>,
    #[serde(default)]
    pub y_grid: Vec<f64>,
    /// Step counts of the fixed-horizon bound check.
    #[serde(default)]
    pub steps: Vec<u64>,
    #[serde(default)]
    pub estimator: Estimator,
    /// Grid points at or above this level use importance sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_from: Option<f64>,
    /// Sample size for importance-sampled points; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_n: Option<u64>,
    #[serde(default)]
    pub is_config: IsSettings,
    #[serde(default = "default_window")]
    pub window: JointTailWindow,
    #[serde(default = "default_c_env")]
    pub c_env: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub execution: Execution,
}

/// A rejected configuration, with the line of the offending field when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: `{}` {}", self.field, self.message),
            None => write!(f, "config error: `{}` {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, field: &str) -> Option<usize> {
    let needle = format!("\"{field}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

impl ExperimentConfig {
    /// Parses and validates a JSON configuration.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            field: "<json>".into(),
            message: e.to_string(),
        })?;
        config.validate().map_err(|(field, message)| ConfigError {
            line: line_of(text, field),
            field: field.into(),
            message,
        })?;
        Ok(config)
    }

    fn sample_size(&self) -> Option<u64> {
        self.n
    }

    pub fn needs_samples(&self) -> bool {
        !matches!(self.kind, Kind::ClassCheck | Kind::OracleDp)
    }

    pub fn uses_is(&self, level: f64) -> bool {
        self.estimator == Estimator::IsMixture || self.is_from.is_some_and(|t| level >= t)
    }

    /// Semantic checks; returns the offending field and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let increasing = |name: &'static str, g: &[f64], positive: bool| -> Result<(), (&'static str, String)> {
            if g.is_empty() {
                return Err((name, "must not be empty".into()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err((name, "must contain finite values".into()));
            }
            if positive && g[0] <= 0.0 {
                return Err((name, "must contain positive values".into()));
            }
            if g.windows(2).any(|w| w[1] <= w[0]) {
                return Err((name, "must be strictly increasing".into()));
            }
            Ok(())
        };
        let lattice = matches!(self.model.family, Family::Lattice { .. });
        if self.needs_samples() {
            match self.sample_size() {
                None => return Err(("n", format!("is required for kind {}", self.kind.as_str()))),
                Some(0) => return Err(("n", "must be at least 1".into())),
                _ => {}
            }
        }
        for (name, v) in [("n", self.n), ("e_tau_n", self.e_tau_n), ("is_n", self.is_n)] {
            if v == Some(0) {
                return Err((name, "must be at least 1".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(("max_steps", "must be at least 1".into()));
        }
        let w = self.is_config.mixture_weight;
        if !(w > 0.0 && w < 1.0) {
            return Err(("mixture_weight", "must lie strictly inside (0, 1)".into()));
        }
        if let Some(b) = self.is_config.tilt_threshold {
            if !(b > 0.0 && b.is_finite()) {
                return Err(("tilt_threshold", "must be positive".into()));
            }
        }
        let any_is = self.estimator == Estimator::IsMixture || self.is_from.is_some();
        if any_is && (lattice || matches!(self.model.family, Family::Degenerate)) {
            return Err((
                "estimator",
                "importance sampling is unsupported for lattice and degenerate models".into(),
            ));
        }
        if !(self.window.epsilon > 0.0) {
            return Err(("epsilon", "must be positive".into()));
        }
        if !(self.window.r > 0.0) {
            return Err(("R", "must be positive".into()));
        }
        match self.kind {
            Kind::AreaTail | Kind::TauTail | Kind::MaxTail | Kind::Headline => increasing("x_grid", &self.x_grid, true)?,
            Kind::JointTail => {
                increasing("x_grid", &self.x_grid, true)?;
                increasing("y_grid", &self.y_grid, false)?;
            }
            Kind::SigmaLaw => {
                increasing("y_grid", &self.y_grid, true)?;
                if self.k_max == 0 {
                    return Err(("k_max", "must be at least 1".into()));
                }
                if any_is {
                    return Err(("estimator", "the sigma law is estimated by crude sampling only".into()));
                }
            }
            Kind::BoundsGrid => {
                increasing("x_grid", &self.x_grid, true)?;
                increasing("y_grid", &self.y_grid, true)?;
                if self.steps.is_empty() || self.steps.contains(&0) || self.steps.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(("steps", "must be a nonempty increasing list of positive integers".into()));
                }
                if self.c_env.is_empty() || self.c_env.iter().any(|c| !(*c > 0.0)) {
                    return Err(("c_env", "must be a nonempty list of positive values".into()));
                }
                if !(self.eps > 0.0) {
                    return Err(("eps", "must be positive".into()));
                }
            }
            Kind::ClassCheck => {
                increasing("x_grid", &self.x_grid, true)?;
                if self.rho.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                    return Err(("rho", "must contain nonnegative values".into()));
                }
            }
            Kind::OracleDp => {
                if !lattice {
                    return Err(("family", "oracle_dp needs the lattice family".into()));
                }
                increasing("x_grid", &self.x_grid, false)?;
                if self.x_grid[0] < 0.0 {
                    return Err(("x_grid", "must contain nonnegative values".into()));
                }
            }
        }
        Ok(())
    }
}
