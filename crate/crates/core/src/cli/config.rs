//! Scenario documents: TOML with strict keys, overlaid on a builtin when
//! `scenario` names one.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenarios;
use crate::density::{Axis, GridLayout};
use crate::spacetime::{FourVector, PhysicalConstants};
use crate::stochastic::InitialDistribution;
use crate::wavefunction::GaugeFunction;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

/// Relative slack when matching a supplied energy to the mass shell.
const SHELL_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    WienerIncrements,
    LorentzInvariant,
    EnergyConstancy,
    Ehrenfest,
    PartialIntegration,
    FokkerPlanck,
    Osmotic,
    Continuity,
    FokkerPlanckHistogram,
    OsmoticHistogram,
    ContinuityHistogram,
    CurrentEquivalence,
    ChargeConservation,
    ChargeConservationHistogram,
    ActionStationarity,
    EomResidual,
    CurlIdentity,
    GaugeInvariance,
}

impl CheckName {
    pub const ALL: [CheckName; 18] = [
        CheckName::WienerIncrements,
        CheckName::LorentzInvariant,
        CheckName::EnergyConstancy,
        CheckName::Ehrenfest,
        CheckName::PartialIntegration,
        CheckName::FokkerPlanck,
        CheckName::Osmotic,
        CheckName::Continuity,
        CheckName::FokkerPlanckHistogram,
        CheckName::OsmoticHistogram,
        CheckName::ContinuityHistogram,
        CheckName::CurrentEquivalence,
        CheckName::ChargeConservation,
        CheckName::ChargeConservationHistogram,
        CheckName::ActionStationarity,
        CheckName::EomResidual,
        CheckName::CurlIdentity,
        CheckName::GaugeInvariance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::WienerIncrements => "wiener_increments",
            CheckName::LorentzInvariant => "lorentz_invariant",
            CheckName::EnergyConstancy => "energy_constancy",
            CheckName::Ehrenfest => "ehrenfest",
            CheckName::PartialIntegration => "partial_integration",
            CheckName::FokkerPlanck => "fokker_planck",
            CheckName::Osmotic => "osmotic",
            CheckName::Continuity => "continuity",
            CheckName::FokkerPlanckHistogram => "fokker_planck_histogram",
            CheckName::OsmoticHistogram => "osmotic_histogram",
            CheckName::ContinuityHistogram => "continuity_histogram",
            CheckName::CurrentEquivalence => "current_equivalence",
            CheckName::ChargeConservation => "charge_conservation",
            CheckName::ChargeConservationHistogram => "charge_conservation_histogram",
            CheckName::ActionStationarity => "action_stationarity",
            CheckName::EomResidual => "eom_residual",
            CheckName::CurlIdentity => "curl_identity",
            CheckName::GaugeInvariance => "gauge_invariance",
        }
    }

    pub fn needs_ensemble(&self) -> bool {
        matches!(
            self,
            CheckName::WienerIncrements
                | CheckName::LorentzInvariant
                | CheckName::EnergyConstancy
                | CheckName::Ehrenfest
                | CheckName::PartialIntegration
                | CheckName::FokkerPlanckHistogram
                | CheckName::OsmoticHistogram
                | CheckName::ContinuityHistogram
                | CheckName::CurrentEquivalence
                | CheckName::ChargeConservationHistogram
        )
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub hbar: f64,
    pub m0: f64,
    pub e: f64,
    pub c: f64,
    pub mu0: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            m0: 1.0,
            e: 1.0,
            c: 1.0,
            mu0: 1.0,
        }
    }
}

impl ConstantsConfig {
    pub fn build(&self) -> Result<PhysicalConstants, ConfigError> {
        PhysicalConstants::new(self.hbar, self.m0, self.e, self.c, self.mu0)
            .map_err(|e| invalid("constants", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    /// Spatial momentum.
    pub momentum: [f64; 3],
    /// `[re, im]`.
    pub weight: [f64; 2],
    /// Filled on shell when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    PlaneWave {
        momentum: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        energy: Option<f64>,
    },
    ModeSum {
        modes: Vec<ModeConfig>,
        /// Accept off-shell energies. Negative controls only.
        #[serde(default)]
        allow_off_shell: bool,
    },
    /// Needs a plane-wave potential.
    Volkov {
        momentum: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        energy: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    /// `A^μ = a^μ · amplitude · cos(k·x + phase)`.
    PlaneWave {
        k: [f64; 4],
        polarization: [f64; 4],
        amplitude: f64,
        phase: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub dtau: f64,
    pub steps: usize,
    pub record_stride: usize,
    /// Ensemble checks skip records before this proper time.
    #[serde(default)]
    pub analyze_from: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub axes: Vec<Axis>,
}

impl GridConfig {
    pub fn layout(&self, field: &str) -> Result<GridLayout, ConfigError> {
        GridLayout::new(self.axes.clone(), FourVector::ZERO)
            .map_err(|e| invalid(field, e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Multiplies the drift of the sampler and of the analytic equations.
    pub velocity_scale: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            velocity_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    /// Relative L2 bound for current equivalence.
    pub current: f64,
    /// Relative floor of the Ehrenfest comparison.
    pub ehrenfest_floor: f64,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        Self {
            current: 0.05,
            ehrenfest_floor: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsConfig {
    pub n: usize,
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl Default for PointsConfig {
    fn default() -> Self {
        Self {
            n: 20,
            min: [-1.0; 4],
            max: [1.0; 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub amplitude: [f64; 4],
    pub k: [f64; 4],
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub axes: Vec<Axis>,
    pub epsilon_max: f64,
    pub perturbation: Vec<PerturbationTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialIntegrationConfig {
    /// One random trigonometric pair per seed.
    pub trig_seeds: Vec<u64>,
    pub trig_terms: usize,
}

impl Default for PartialIntegrationConfig {
    fn default() -> Self {
        Self {
            trig_seeds: vec![1, 2, 3],
            trig_terms: 3,
        }
    }
}

/// Fully resolved scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    pub master_seed: u64,
    pub n_paths: usize,
    /// Coordinates the scenario's law depends on.
    pub active: Vec<usize>,
    pub checks: Vec<CheckName>,
    /// Checks that must fail for the run to count as matched.
    #[serde(default)]
    pub expect_fail: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_paths: bool,
    #[serde(default)]
    pub dump_grid: bool,
    #[serde(default)]
    pub constants: ConstantsConfig,
    pub model: ModelConfig,
    pub potential: PotentialConfig,
    pub tau: TauConfig,
    pub init: InitialDistribution,
    pub grid: GridConfig,
    /// Grid of the analytic residual and conservation checks; `grid` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_grid: Option<GridConfig>,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub points: PointsConfig,
    #[serde(default = "default_gauge")]
    pub gauge: GaugeFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionConfig>,
    #[serde(default)]
    pub partial_integration: PartialIntegrationConfig,
}

pub fn default_gauge() -> GaugeFunction {
    GaugeFunction::quadratic(
        0.3,
        [0.2, -0.1, 0.05, 0.4],
        [
            [0.01, 0.0, 0.02, 0.0],
            [0.0, -0.03, 0.0, 0.01],
            [0.02, 0.0, 0.0, 0.0],
            [0.0, 0.01, 0.0, 0.02],
        ],
    )
}

fn shell_energy(
    field: &str,
    momentum: &[f64; 3],
    energy: &mut Option<f64>,
    consts: &PhysicalConstants,
    allow_off_shell: bool,
) -> Result<(), ConfigError> {
    if !momentum.iter().all(|p| p.is_finite()) {
        return Err(invalid(field, "momentum must be finite"));
    }
    let on = consts.on_shell(*momentum).0[0];
    match energy {
        None => *energy = Some(on),
        Some(e) if !e.is_finite() => return Err(invalid(field, "energy must be finite")),
        Some(e) => {
            let off = (*e * *e - on * on).abs();
            if off <= SHELL_SLACK * on * on {
                *energy = Some(on);
            } else if !allow_off_shell {
                return Err(invalid(
                    field,
                    format!("energy {e} is off the mass shell (on-shell value {on}); set allow_off_shell for controls"),
                ));
            }
        }
    }
    Ok(())
}

fn check_axes(field: &str, axes: &[Axis]) -> Result<(), ConfigError> {
    if axes.is_empty() {
        return Err(invalid(field, "at least one axis is required"));
    }
    GridLayout::new(axes.to_vec(), FourVector::ZERO).map_err(|e| invalid(field, e.to_string()))?;
    Ok(())
}

impl ScenarioConfig {
    /// Applies defaults that depend on other fields and checks every
    /// invariant. Idempotent.
    pub fn validate(&mut self) -> Result<(), ConfigError> {
        if self.scenario.trim().is_empty() {
            return Err(invalid("scenario", "must be non-empty"));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(invalid(
                "master_seed",
                "must fit in a signed 64-bit integer",
            ));
        }
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        if self.active.is_empty() || self.active.iter().any(|&c| c > 3) {
            return Err(invalid(
                "active",
                "coordinates are indices 0..=3, at least one",
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.checks {
            if !seen.insert(*c) {
                return Err(invalid("checks", format!("`{c}` listed twice")));
            }
        }
        for c in &self.expect_fail {
            if !self.checks.contains(c) {
                return Err(invalid(
                    "expect_fail",
                    format!("`{c}` is not among the selected checks"),
                ));
            }
        }
        let consts = self.constants.build()?;
        match &mut self.model {
            ModelConfig::PlaneWave { momentum, energy } => {
                shell_energy("model.energy", momentum, energy, &consts, false)?
            }
            ModelConfig::Volkov { momentum, energy } => {
                shell_energy("model.energy", momentum, energy, &consts, false)?;
                if !matches!(self.potential, PotentialConfig::PlaneWave { .. }) {
                    return Err(invalid(
                        "potential",
                        "a volkov model needs a plane_wave potential",
                    ));
                }
            }
            ModelConfig::ModeSum {
                modes,
                allow_off_shell,
            } => {
                if modes.is_empty() {
                    return Err(invalid("model.modes", "at least one mode is required"));
                }
                for (i, m) in modes.iter_mut().enumerate() {
                    shell_energy(
                        &format!("model.modes[{i}].energy"),
                        &m.momentum,
                        &mut m.energy,
                        &consts,
                        *allow_off_shell,
                    )?;
                    if !m.weight.iter().all(|w| w.is_finite()) || m.weight == [0.0, 0.0] {
                        return Err(invalid(
                            &format!("model.modes[{i}].weight"),
                            "must be finite and nonzero",
                        ));
                    }
                }
            }
        }
        if !(self.tau.dtau.is_finite() && self.tau.dtau > 0.0) {
            return Err(invalid("tau.dtau", "must be positive"));
        }
        if self.tau.steps == 0 {
            return Err(invalid("tau.steps", "must be at least 1"));
        }
        if self.tau.record_stride == 0 || self.tau.steps % self.tau.record_stride != 0 {
            return Err(invalid(
                "tau.record_stride",
                "must be positive and divide tau.steps",
            ));
        }
        let span = self.tau.dtau * self.tau.steps as f64;
        if !(self.tau.analyze_from >= 0.0 && self.tau.analyze_from <= span) {
            return Err(invalid(
                "tau.analyze_from",
                "must lie within the simulated span",
            ));
        }
        check_axes("grid.axes", &self.grid.axes)?;
        if let Some(a) = &self
            .grid
            .axes
            .iter()
            .find(|a| !self.active.contains(&a.coord))
        {
            return Err(invalid(
                "grid.axes",
                format!("axis on coordinate {} is not active", a.coord),
            ));
        }
        if let Some(g) = &self.analytic_grid {
            check_axes("analytic_grid.axes", &g.axes)?;
        }
        if !(self.control.velocity_scale.is_finite() && self.control.velocity_scale > 0.0) {
            return Err(invalid("control.velocity_scale", "must be positive"));
        }
        if !(self.tolerances.current > 0.0 && self.tolerances.ehrenfest_floor >= 0.0) {
            return Err(invalid("tolerances", "must be positive"));
        }
        let p = &self.points;
        if p.n == 0
            || (0..4).any(|mu| {
                !(p.min[mu].is_finite() && p.max[mu].is_finite() && p.min[mu] <= p.max[mu])
            })
        {
            return Err(invalid("points", "need n >= 1 and min <= max"));
        }
        match &self.action {
            Some(a) => {
                check_axes("action.axes", &a.axes)?;
                if !(a.epsilon_max > 0.0) || a.perturbation.is_empty() {
                    return Err(invalid("action", "need epsilon_max > 0 and a perturbation"));
                }
            }
            None if self.checks.contains(&CheckName::ActionStationarity) => {
                return Err(invalid("action", "required by action_stationarity"));
            }
            None => {}
        }
        if self.partial_integration.trig_terms == 0 {
            return Err(invalid(
                "partial_integration.trig_terms",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }
}

/// First line of `text` whose key or table header names `key`; 1-based,
/// 0 if none.
fn line_of(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| {
            let t = l.trim_start();
            let head = t.trim_start_matches('[').trim_start_matches('[');
            let name = head.split(['=', ']', ' ', '.']).next().unwrap_or("");
            name == key
                || t.contains(&format!("\"{key}\""))
                || t.split('.').any(|p| p.trim() == key)
        })
        .map_or(0, |i| i + 1)
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let end = message[start..].find('`')? + start;
    Some(&message[start..end])
}

/// Overlays `top` on `base`. A table that names its own `kind` replaces
/// the base table instead of merging, so variant fields never mix.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) if !t.contains_key("kind") => {
                merge(b, t)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses, overlays on the builtin named by `scenario` (if any), applies
/// defaults and validates.
pub fn load_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let top: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map_or(0, |s| {
            text[..s.start.min(text.len())].lines().count().max(1)
        });
        ConfigError::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    let id = match top.get("scenario") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(ConfigError::Parse {
                line: line_of(text, "scenario"),
                message: "`scenario` must be a string".into(),
            })
        }
        None => return Err(invalid("scenario", "missing scenario id")),
    };
    let mut merged = match scenarios::builtin(&id) {
        Some(b) => toml::Table::try_from(&b).expect("builtin configs serialize"),
        None => toml::Table::new(),
    };
    merge(&mut merged, top);
    let mut cfg: ScenarioConfig =
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| {
                let message = e.message().to_string();
                if message.starts_with("missing field") {
                    let field = backticked(&message).unwrap_or("?").to_string();
                    return ConfigError::Validation {
                        field,
                        message: format!("required for scenario `{id}`, which is not a builtin"),
                    };
                }
                let line = backticked(&message).map_or(0, |k| line_of(text, k));
                ConfigError::Parse { line, message }
            })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Where a scenario document comes from.
pub enum ConfigSource {
    Path(PathBuf),
    Text(String),
}

pub fn load_config(source: ConfigSource) -> Result<ScenarioConfig, ConfigError> {
    match source {
        ConfigSource::Text(t) => load_config_str(&t),
        ConfigSource::Path(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| ConfigError::Parse {
                line: 0,
                message: format!("{}: {e}", p.display()),
            })?;
            load_config_str(&text)
        }
    }
}

/// Annotated template listing every key, for `dump-schema`.
pub fn schema() -> String {
    let mut out = String::from(
        "# Scenario document. Keys absent here are rejected. When `scenario` names a\n\
         # builtin, omitted keys take the builtin's values; tables carrying `kind`\n\
         # replace the builtin table whole.\n#\n\
         # checks / expect_fail: ",
    );
    out.push_str(
        &CheckName::ALL
            .iter()
            .map(CheckName::as_str)
            .collect::<Vec<_>>()
            .join(", "),
    );
    out.push_str(
        "\n# model.kind: plane_wave {momentum, energy?} | mode_sum {modes = [{momentum, weight, energy?}], allow_off_shell}\n\
         #             | volkov {momentum, energy?}\n\
         # potential.kind: zero | plane_wave {k, polarization, amplitude, phase}\n\
         # init.kind: point {x} | uniform {min, max} | density {min, max}\n\
         # grid.axes / analytic_grid.axes / action.axes: [{coord, min, max, bins, periodic}]\n\n",
    );
    let mut example = scenarios::builtin("volkov_plane_wave_field").expect("builtin exists");
    example.output_dir = Some(PathBuf::from("out"));
    out.push_str(&example.to_toml());
    out
}
