//! Scenario configuration files.
//!
//! A scenario is a JSON document with a `schema_version` field. See the
//! bundled files under `scenarios/` for complete examples.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    pub interaction: InteractionConfig,
    pub initial: InitialConfig,
    pub solver: SolverConfig,
    pub channels: ChannelConfig,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for randomized probes.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub half_lengths: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionConfig {
    /// `|k|^2`
    #[default]
    Laplacian,
    /// `sqrt(|k|^2 + m^2)`
    Relativistic { mass: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `<x / width>^-delta`
    Bracket,
    /// `exp(-|x|^2 / 2 width^2)`
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoverConfig {
    /// Well depth; the bump is `-depth * exp(-|x|^2 / 2 width^2)`.
    pub depth: f64,
    pub width: f64,
    pub velocity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionConfig {
    Free,
    /// `strength * profile(x)` with decay tag `delta`.
    Localized {
        strength: f64,
        width: f64,
        delta: f64,
        #[serde(default = "default_profile")]
        profile: Profile,
    },
    ChargeTransfer { movers: Vec<MoverConfig> },
    /// `c |psi|^m psi`, `c = [re, im]`.
    Power { coefficient: [f64; 2], exponent: f64 },
    /// `sign (K * |psi|^2) psi` with `K = strength exp(-|x|^2 / 2 width^2)`.
    Hartree { strength: f64, width: f64, sign: f64 },
    Sum { terms: Vec<InteractionConfig> },
}

fn default_profile() -> Profile {
    Profile::Bracket
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Coherent {
        center: Vec<f64>,
        momentum: Vec<f64>,
        sigma: f64,
    },
    /// `eta sech(eta (x - center)) e^{i velocity x / 2}`, 1D only.
    Soliton {
        eta: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// `sum_k amplitude_k state_k`
    Superposition { terms: Vec<WeightedState> },
    /// A WFN1 snapshot, resolved relative to the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedState {
    pub amplitude: [f64; 2],
    pub state: InitialConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `start, 2 start, 4 start, ...` up to `t_final`.
    Dyadic { start: f64 },
    /// `start 2^{k / per_octave}` up to `t_final`.
    Geometric { start: f64, per_octave: u32 },
    List { times: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub boundary_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub alpha: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

/// A diagnostic with its acceptance band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticConfig {
    /// `||psi_w(T)||_2 <= max`
    WeakNorm { max: f64 },
    /// Fitted slope of `||psi_in(t)||_2` over `window` is `<= max_slope`.
    InteractionDecay { window: [f64; 2], max_slope: f64 },
    /// Cook reconstruction residual relative to `||psi0||`.
    Cook { max_residual: f64 },
    /// Cauchy increments of `Omega(t)` decrease after `after`.
    CauchyMonotone { after: f64 },
    /// Relative propagation budget slack.
    Rpres { max_slack: f64 },
    /// Charge-transfer Duhamel residual relative to `||psi0||`.
    Duhamel { max_residual: f64 },
    /// Growth exponent of `(psi_{w,eps}, |x| psi_{w,eps})` over `window`.
    WeakMoment { window: [f64; 2], max_exponent: f64 },
    /// `||psi_w(T)||^2` within `tolerance` (relative) of `mass`.
    WeakMass { mass: f64, tolerance: f64 },
    /// Exterior Morawetz series; reported only.
    Morawetz { alpha: f64, radius: f64 },
}

impl DiagnosticConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WeakNorm { .. } => "weak_norm",
            Self::InteractionDecay { .. } => "interaction_decay",
            Self::Cook { .. } => "cook",
            Self::CauchyMonotone { .. } => "cauchy_monotone",
            Self::Rpres { .. } => "rpres",
            Self::Duhamel { .. } => "duhamel",
            Self::WeakMoment { .. } => "weak_moment",
            Self::WeakMass { .. } => "weak_mass",
            Self::Morawetz { .. } => "morawetz",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
    Wfn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Schedule times whose states are written as WFN1 snapshots.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
            snapshot_times: Vec::new(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> LabResult<Self> {
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(LabError::Config(format!(
                    "schema_version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(LabError::Config("missing schema_version".into())),
        }
        let config: Self = serde_json::from_value(value)?;
        config.check()?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> LabResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.check_files()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        fn fix(init: &mut InitialConfig, base: &Path) {
            match init {
                InitialConfig::File { path } if path.is_relative() => *path = base.join(&*path),
                InitialConfig::Superposition { terms } => terms.iter_mut().for_each(|t| fix(&mut t.state, base)),
                _ => {}
            }
        }
        fix(&mut self.initial, base);
    }

    pub fn check_files(&self) -> LabResult<()> {
        fn walk(init: &InitialConfig) -> LabResult<()> {
            match init {
                InitialConfig::File { path } if !path.exists() => {
                    Err(LabError::Config(format!("initial data file {} does not exist", path.display())))
                }
                InitialConfig::Superposition { terms } => terms.iter().try_for_each(|t| walk(&t.state)),
                _ => Ok(()),
            }
        }
        walk(&self.initial)
    }

    /// Structural checks; parameter-range problems are warnings raised at run time.
    pub fn check(&self) -> LabResult<()> {
        let dims = self.grid.points.len();
        if dims == 0 || dims != self.grid.half_lengths.len() {
            return Err(LabError::Config("grid points and half_lengths must have the same nonzero length".into()));
        }
        if !(self.solver.dt > 0.0 && self.solver.t_final > 0.0) {
            return Err(LabError::Config("solver dt and t_final must be positive".into()));
        }
        if !(self.channels.alpha > 0.0 && self.channels.alpha < 1.0) {
            return Err(LabError::Config(format!("alpha must lie in (0, 1), got {}", self.channels.alpha)));
        }
        if !(self.channels.epsilon > 0.0 && self.channels.epsilon < 0.5) {
            return Err(LabError::Config(format!("epsilon must lie in (0, 1/2), got {}", self.channels.epsilon)));
        }
        let mut seen = std::collections::HashSet::new();
        for d in &self.diagnostics {
            if !seen.insert(d.name()) {
                return Err(LabError::Config(format!("diagnostic {} is configured twice", d.name())));
            }
        }
        Ok(())
    }

    /// Schedule times up to `t_final`, which is always included.
    pub fn schedule(&self) -> LabResult<Vec<f64>> {
        let t_final = self.solver.t_final;
        let mut times = match &self.solver.schedule {
            ScheduleConfig::Dyadic { start } => {
                if !(*start > 0.0) {
                    return Err(LabError::Config("dyadic schedule start must be positive".into()));
                }
                freechan_core::propagators::dyadic_schedule(*start, t_final)
            }
            ScheduleConfig::Geometric { start, per_octave } => {
                if !(*start > 0.0) || *per_octave == 0 {
                    return Err(LabError::Config("geometric schedule needs start > 0 and per_octave >= 1".into()));
                }
                let mut v = Vec::new();
                let mut k = 0;
                loop {
                    let t = start * 2f64.powf(k as f64 / *per_octave as f64);
                    if t > t_final * (1.0 + 1e-12) {
                        break;
                    }
                    v.push(t);
                    k += 1;
                }
                v
            }
            ScheduleConfig::List { times } => times.iter().copied().filter(|t| *t <= t_final).collect(),
        };
        if times.last().is_none_or(|l| (l - t_final).abs() > 1e-12 * t_final) {
            times.push(t_final);
        }
        Ok(times)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "name": "t",
            "grid": {"points": [256], "half_lengths": [32.0]},
            "interaction": {"type": "free"},
            "initial": {"type": "coherent", "center": [0.0], "momentum": [0.0], "sigma": 1.0},
            "solver": {"dt": 0.1, "t_final": 8.0, "schedule": {"type": "dyadic", "start": 1.0}},
            "channels": {"alpha": 0.4}
        })
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ScenarioConfig::from_value(minimal()).unwrap();
        assert_eq!(c.dispersion, DispersionConfig::Laplacian);
        assert_eq!(c.channels.epsilon, 0.1);
        assert_eq!(c.schedule().unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(c.output.formats, vec![Format::Csv, Format::Json, Format::Svg]);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut v = minimal();
        v["schema_version"] = 7.into();
        assert!(matches!(ScenarioConfig::from_value(v), Err(LabError::Config(_))));
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("schema_version");
        assert!(ScenarioConfig::from_value(v).is_err());
    }

    #[test]
    fn unknown_fields_and_duplicate_diagnostics_are_rejected() {
        let mut v = minimal();
        v["grid"]["spacing"] = 1.0.into();
        assert!(ScenarioConfig::from_value(v).is_err());
        let mut v = minimal();
        v["diagnostics"] = serde_json::json!([{"type": "weak_norm", "max": 1.0}, {"type": "weak_norm", "max": 2.0}]);
        assert!(ScenarioConfig::from_value(v).is_err());
    }

    #[test]
    fn geometric_schedule_ends_at_t_final() {
        let mut v = minimal();
        v["solver"]["schedule"] = serde_json::json!({"type": "geometric", "start": 1.0, "per_octave": 2});
        v["solver"]["t_final"] = 5.0.into();
        let t = ScenarioConfig::from_value(v).unwrap().schedule().unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(*t.last().unwrap(), 5.0);
    }

    #[test]
    fn missing_initial_file_is_a_config_error() {
        let mut v = minimal();
        v["initial"] = serde_json::json!({"type": "file", "path": "/nonexistent/psi.wfn"});
        let c = ScenarioConfig::from_value(v).unwrap();
        assert!(c.check_files().is_err());
    }
}
