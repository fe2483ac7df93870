use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::estimator::MleSettings;
use crate::fisher::{PhasePolicy, PhaseSchedule, QuadratureSign};
use crate::gaussian::ProbeSpec;
use crate::network::{NetworkSpec, ParametrizedNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// One experiment, as read from the `--config` JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    pub probe: ProbeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    /// Explicit oscillator phases; overrides any schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Relative phases held fixed at every `N` (shot-noise control).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_gamma: Option<Vec<f64>>,
    #[serde(default = "default_phi_true")]
    pub phi_true: f64,
    /// Phases at which `fisher` reports rows; defaults to `[phi_true]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default = "default_nu")]
    pub nu: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Monte-Carlo samples per `fisher` row; 0 disables the oracle columns.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<f64>>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Offsets {
    Uniform(f64),
    PerMode(Vec<f64>),
}

impl Default for Offsets {
    fn default() -> Self {
        Offsets::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub k: Offsets,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_sign")]
    pub sign: QuadratureSign,
    /// Per-channel signs; overrides `sign`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signs: Option<Vec<QuadratureSign>>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { k: Offsets::default(), alpha: 1.0, sign: QuadratureSign::Plus, signs: None }
    }
}

fn default_phi_true() -> f64 {
    0.3
}
fn default_nu() -> usize {
    1000
}
fn default_trials() -> usize {
    200
}
fn default_mc_samples() -> usize {
    10_000
}
fn default_window() -> f64 {
    1.0
}
fn default_grid() -> usize {
    64
}
fn default_alpha() -> f64 {
    1.0
}
fn default_sign() -> QuadratureSign {
    QuadratureSign::Plus
}

/// Parses JSON, reporting the offending field path on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            format!("config: {inner}")
        } else {
            format!("config field `{path}`: {inner}")
        }
    })
}

/// Everything built from the config before any computation starts.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub network: ParametrizedNetwork,
    pub policy: PhasePolicy,
    pub photons: Vec<f64>,
    pub beta: f64,
    pub settings: MleSettings,
}

impl Resolved {
    pub fn probe(&self, n: f64) -> Result<ProbeSpec, String> {
        ProbeSpec::new(n, self.beta).map_err(|e| e.to_string())
    }

    pub fn single_photon_number(&self) -> f64 {
        self.photons[0]
    }
}

impl ExperimentConfig {
    /// Semantic checks and construction of the network, probe and phase policy.
    pub fn resolve(&self) -> Result<Resolved, String> {
        let field = |name: &str, e: crate::Error| format!("config field `{name}`: {e}");
        let network = self.network.build().map_err(|e| field("network", e))?;
        let m = network.modes();

        let photons = match (&self.probe.n, &self.probe.n_list) {
            (Some(n), None) => vec![*n],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => return Err("config field `probe.n_list`: must not be empty".into()),
            (Some(_), Some(_)) => return Err("config field `probe`: give either `n` or `n_list`, not both".into()),
            (None, None) => return Err("config field `probe`: missing `n` or `n_list`".into()),
        };
        for &n in &photons {
            ProbeSpec::new(n, self.probe.beta).map_err(|e| field("probe", e))?;
        }

        let chosen = [self.schedule.is_some(), self.theta.is_some(), self.fixed_gamma.is_some()]
            .iter()
            .filter(|x| **x)
            .count();
        if chosen > 1 {
            return Err("config: `schedule`, `theta` and `fixed_gamma` are mutually exclusive".into());
        }
        let policy = if let Some(theta) = &self.theta {
            PhasePolicy::Explicit(theta.clone())
        } else if let Some(gamma) = &self.fixed_gamma {
            PhasePolicy::FixedRelative(gamma.clone())
        } else {
            let sc = self.schedule.clone().unwrap_or_default();
            let offsets = match &sc.k {
                Offsets::Uniform(k) => vec![*k; m],
                Offsets::PerMode(k) => k.clone(),
            };
            let signs = sc.signs.clone().unwrap_or_else(|| vec![sc.sign; offsets.len()]);
            PhasePolicy::Schedule(
                PhaseSchedule::with_signs(offsets, sc.alpha, signs).map_err(|e| field("schedule", e))?,
            )
        };
        let lengths_ok = match &policy {
            PhasePolicy::Explicit(v) | PhasePolicy::FixedRelative(v) => v.len() == m,
            PhasePolicy::Schedule(s) => s.offsets.len() == m,
        };
        if !lengths_ok {
            return Err(format!("config: phase settings must have one entry per mode ({m})"));
        }

        if !self.phi_true.is_finite() || self.phi.iter().flatten().any(|p| !p.is_finite()) {
            return Err("config field `phi`: phases must be finite".into());
        }
        if self.nu == 0 {
            return Err("config field `nu`: must be at least 1".into());
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err("config field `window`: must be positive".into());
        }
        if self.grid < 32 {
            return Err("config field `grid`: must be at least 32".into());
        }
        if self.mc_samples != 0 && self.mc_samples < 1000 {
            return Err("config field `mc_samples`: use 0 or at least 1000".into());
        }
        Ok(Resolved {
            network,
            policy,
            photons,
            beta: self.probe.beta,
            settings: MleSettings { window_width: self.window, grid: self.grid },
        })
    }
}
