//! Run configuration: a single JSON document validated before any work.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use critwave::diagnostics::{EPS_SCATTER, TAU};
use critwave::evolution::EvolveConfig;
use critwave::{Grid, PotentialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Steady,
    Spectrum,
    Evolve,
    Channel,
    Resolve,
    Threshold,
    ExcitedConstruct,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Steady => "steady",
            Experiment::Spectrum => "spectrum",
            Experiment::Evolve => "evolve",
            Experiment::Channel => "channel",
            Experiment::Resolve => "resolve",
            Experiment::Threshold => "threshold",
            Experiment::ExcitedConstruct => "excited-construct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub r_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 4000, r_max: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// Optional; when present it must name the subcommand being run.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            potential: None,
            experiment: None,
            seed: 0,
            output_dir: None,
            params: serde_json::Value::Null,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, String> {
        Grid::new(self.grid.n, self.grid.r_max).map_err(|e| format!("grid: {e}"))
    }
}

/// Central-value window scanned for the steady-state catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanParams {
    pub a_min: f64,
    pub a_max: f64,
    pub n_scan: usize,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { a_min: -4.0, a_max: 4.0, n_scan: 400 }
    }
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.a_min < self.a_max) || self.n_scan < 2 {
            return Err(format!("scan needs a_min < a_max and n_scan >= 2, got [{}, {}] with {}", self.a_min, self.a_max, self.n_scan));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyParams {
    pub catalog: ScanParams,
    /// Write one `r, phi` CSV per state.
    pub profiles: bool,
}

impl Default for SteadyParams {
    fn default() -> Self {
        Self { catalog: ScanParams::default(), profiles: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct SpectrumParams {
    /// Catalog index of the linearization point; `None` linearizes at zero.
    pub state: Option<usize>,
    pub catalog: ScanParams,
    /// Write one `r, rho` CSV per negative mode.
    pub profiles: bool,
}


/// Initial data, optionally with a seeded velocity perturbation:
///
/// - `zero`: `(0, 0)`;
/// - `steady`: `(φ_index, 0)` from the catalog;
/// - `bump`: even bump `A(β((r−c)/h) + β((r+c)/h))` in `u`, or in `u_t` when
///   `velocity` is set;
/// - `growing_mode`: `(φ_index, 0) + s(ρ_mode, k ρ_mode)`, `mode` 0-based and
///   defaulting to 0, `s` defaulting to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: InitialKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub velocity: bool,
    /// `L²` size of a seeded bump perturbation added to `u_t`.
    #[serde(default)]
    pub velocity_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Zero,
    Steady,
    Bump,
    GrowingMode,
}

impl InitialSpec {
    pub fn of_kind(kind: InitialKind) -> Self {
        Self {
            kind,
            index: None,
            mode: None,
            s: None,
            amplitude: None,
            center: None,
            half_width: None,
            velocity: false,
            velocity_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.velocity_noise >= 0.0 && self.velocity_noise.is_finite()) {
            return Err(format!("velocity_noise must be nonnegative, got {}", self.velocity_noise));
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(format!("initial data of kind {:?} needs {what}", self.kind)) };
        match self.kind {
            InitialKind::Zero => Ok(()),
            InitialKind::Steady => need(self.index.is_some(), "index"),
            InitialKind::Bump => {
                need(self.amplitude.is_some_and(f64::is_finite), "a finite amplitude")?;
                need(self.center.is_some_and(|c| c >= 0.0), "center >= 0")?;
                need(self.half_width.is_some_and(|h| h > 0.0), "half_width > 0")
            }
            InitialKind::GrowingMode => {
                need(self.index.is_some(), "index")?;
                need(self.s.is_none_or(f64::is_finite), "a finite s")
            }
        }
    }
}

fn zero_initial() -> InitialSpec {
    InitialSpec::of_kind(InitialKind::Zero)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveParams {
    pub initial: InitialSpec,
    pub evolve: EvolveConfig,
    pub catalog: ScanParams,
    /// Catalog index whose unstable modes are tracked as `lambda_i`.
    pub mode_reference: Option<usize>,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self { initial: zero_initial(), evolve: EvolveConfig::default(), catalog: ScanParams::default(), mode_reference: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub initial: InitialSpec,
    /// Base radius `R` of the cone `r ≥ R + |t|`.
    pub r_base: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub sample_interval: f64,
    pub catalog: ScanParams,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { initial: zero_initial(), r_base: 0.0, t_end: 20.0, cfl: 0.9, sample_interval: 0.25, catalog: ScanParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolveParams {
    pub initial: InitialSpec,
    pub evolve: EvolveConfig,
    pub catalog: ScanParams,
    pub eps_scatter: f64,
    pub tau: f64,
}

impl Default for ResolveParams {
    fn default() -> Self {
        Self {
            initial: zero_initial(),
            evolve: EvolveConfig { t_end: 100.0, ..EvolveConfig::default() },
            catalog: ScanParams::default(),
            eps_scatter: EPS_SCATTER,
            tau: TAU,
        }
    }
}

/// One-parameter family `base + s·direction`, `s ∈ s_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdParams {
    pub base: InitialSpec,
    pub direction: InitialSpec,
    pub s_range: [f64; 2],
    pub tol_s: f64,
    pub max_probes: usize,
    pub evolve: EvolveConfig,
    pub catalog: ScanParams,
    pub eps_scatter: f64,
    pub tau: f64,
    /// Catalog index of the unstable state, for residence times.
    pub phi_index: Option<usize>,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            base: zero_initial(),
            direction: zero_initial(),
            s_range: [0.0, 1.0],
            tol_s: 1e-10,
            max_probes: critwave::manifold::MAX_PROBES,
            evolve: EvolveConfig { t_end: 100.0, ..EvolveConfig::default() },
            catalog: ScanParams::default(),
            eps_scatter: EPS_SCATTER,
            tau: TAU,
            phi_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExcitedParams {
    pub lambda: f64,
    /// Stopping tolerance of the fixed-point iteration in `L⁶`.
    pub tol: f64,
    pub profiles: bool,
}

impl Default for ExcitedParams {
    fn default() -> Self {
        Self { lambda: 16.0, tol: 1e-10, profiles: true }
    }
}

/// Parses `params` into the experiment's typed parameters; `null` means
/// all defaults.
pub fn parse_params<T: serde::de::DeserializeOwned + Default>(value: &serde_json::Value) -> Result<T, String> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).map_err(|e| format!("params: {e}"))
}
