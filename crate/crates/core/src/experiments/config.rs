use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::characteristics::MapMode;
use crate::continuum::SchemeConfig;
use crate::error::{Error, Result};
use crate::ode::{Method, SolverConfig};
use crate::rates::{PhysicalParams, RateModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    /// Output file name, relative to the output directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PowerLaw {
        alpha0: f64,
        beta0: f64,
        gamma: f64,
        c1: f64,
    },
    Physical {
        params: PhysicalParams,
        gamma: f64,
        c1: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<RateModel> {
        match self {
            ModelSpec::PowerLaw {
                alpha0,
                beta0,
                gamma,
                c1,
            } => RateModel::power_law(*alpha0, *beta0, *gamma, *c1),
            ModelSpec::Physical { params, gamma, c1 } => RateModel::physical(*params, *gamma, *c1),
        }
        .map_err(|e| Error::Config(format!("model: {e}")))
    }
}

/// Initial profiles, as functions of size (BD) or of `x`/`q` (continuum).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// `amplitude * exp(-x / scale)`.
    Exponential { scale: f64, amplitude: f64 },
    /// Only monomers present, with concentration `c1`.
    MonomersOnly { c1: f64 },
    /// Explicit per-size values starting at size 1.
    Values { values: Vec<f64> },
}

impl InitialSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialSpec::Gaussian {
                center,
                width,
                amplitude,
            } => amplitude * (-(x - center).powi(2) / (2.0 * width * width)).exp(),
            InitialSpec::Exponential { scale, amplitude } => amplitude * (-x / scale).exp(),
            InitialSpec::MonomersOnly { c1 } => {
                if x == 1.0 {
                    *c1
                } else {
                    0.0
                }
            }
            InitialSpec::Values { values } => {
                let i = x.round() as usize;
                if x == x.round() && i >= 1 && i <= values.len() {
                    values[i - 1]
                } else {
                    0.0
                }
            }
        }
    }

    /// Concentrations of sizes `1..=n_max`.
    pub fn sizes(&self, n_max: usize) -> Vec<f64> {
        (1..=n_max).map(|n| self.eval(n as f64)).collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        let bad = match self {
            InitialSpec::Gaussian { width, .. } => !(*width > 0.0),
            InitialSpec::Exponential { scale, .. } => !(*scale > 0.0),
            InitialSpec::MonomersOnly { c1 } => !(*c1 >= 0.0),
            InitialSpec::Values { values } => values.iter().any(|v| !v.is_finite()),
        };
        if bad {
            return Err(Error::Config(format!("{what}: invalid initial profile parameters")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    Time(f64),
    /// Fraction of `G(N)`.
    FractionOfG(f64),
}

/// `count` geometric points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl ProbeGrid {
    pub fn points(&self) -> Vec<f64> {
        crate::util::geomspace(self.lo, self.hi, self.count)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.count >= 2) {
            return Err(Error::Config(format!(
                "{what}: probe grid needs 0 < lo < hi and count >= 2"
            )));
        }
        Ok(())
    }
}

fn default_split_index() -> usize {
    1
}

fn default_cells_per_unit() -> usize {
    5
}

fn default_allowance() -> f64 {
    1.0
}

fn default_probes() -> usize {
    1000
}

fn default_map_mode() -> MapMode {
    MapMode::AnalyticPowerLaw
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BdReference {
    pub n_max: usize,
    pub horizon: f64,
    pub initial: InitialSpec,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingConvergence {
    pub n_max: usize,
    pub horizon: f64,
    pub dt_list: Vec<f64>,
    pub initial: InitialSpec,
    #[serde(default)]
    pub chi: SolverConfig,
    #[serde(default)]
    pub reference: SolverConfig,
    #[serde(default = "default_split_index")]
    pub split_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpVsBdVsLsw {
    pub n_max: usize,
    pub n0: usize,
    pub horizon: Horizon,
    pub initial: InitialSpec,
    #[serde(default = "default_cells_per_unit")]
    pub cells_per_unit: usize,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub bd_solver: SolverConfig,
}

/// Shared setup of the diffusion-problem scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSetup {
    /// Minimal size `M`; defaults to the model's minimal admissible size.
    #[serde(default)]
    pub m: Option<f64>,
    /// Lower end of the `q` mesh; defaults to `M`.
    #[serde(default)]
    pub q_min: Option<f64>,
    pub q_max: f64,
    pub cells: usize,
    pub t: f64,
    pub initial: InitialSpec,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "default_map_mode")]
    pub map_mode: MapMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionResiduals {
    pub setup: DiffusionSetup,
    pub snapshot_cadence: f64,
    pub probes: ProbeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayProbe {
    pub setup: DiffusionSetup,
    pub probes: ProbeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McCrossCheck {
    pub setup: DiffusionSetup,
    pub n_samples: usize,
    pub dt_sde: f64,
    #[serde(default)]
    pub antithetic: bool,
    pub probes: Vec<f64>,
    /// Constant `C` of the scheme allowance `C (dt_sde + dq^2)`.
    #[serde(default = "default_allowance")]
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionAudit {
    pub n_max: usize,
    /// Requested minimal size; refined for non-power-law models.
    pub m: f64,
    #[serde(default = "default_probes")]
    pub dissipativity_probes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub enum Scenario {
    BdReference(BdReference),
    SplittingConvergence(SplittingConvergence),
    FpVsBdVsLsw(FpVsBdVsLsw),
    DiffusionResiduals(DiffusionResiduals),
    DecayProbe(DecayProbe),
    McCrossCheck(McCrossCheck),
    AssumptionAudit(AssumptionAudit),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::BdReference(_) => "BdReference",
            Scenario::SplittingConvergence(_) => "SplittingConvergence",
            Scenario::FpVsBdVsLsw(_) => "FpVsBdVsLsw",
            Scenario::DiffusionResiduals(_) => "DiffusionResiduals",
            Scenario::DecayProbe(_) => "DecayProbe",
            Scenario::McCrossCheck(_) => "McCrossCheck",
            Scenario::AssumptionAudit(_) => "AssumptionAudit",
        }
    }
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn check_n_max(n_max: usize, field: &str) -> Result<()> {
    if n_max < 2 {
        return cfg_err(format!("{field}: n_max must be at least 2"));
    }
    Ok(())
}

fn check_solver(cfg: &SolverConfig, field: &str) -> Result<()> {
    cfg.validate().map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn check_setup(s: &DiffusionSetup, field: &str) -> Result<()> {
    if s.cells < 8 {
        return cfg_err(format!("{field}.cells: at least 8 cells required"));
    }
    if !(s.t >= 0.0) {
        return cfg_err(format!("{field}.t: must be nonnegative"));
    }
    if !(s.scheme.dt > 0.0) || !(0.0..=1.0).contains(&s.scheme.theta) {
        return cfg_err(format!("{field}.scheme: dt must be positive and theta in [0, 1]"));
    }
    s.initial.validate(&format!("{field}.initial"))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return cfg_err(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        self.model.build()?;
        match &self.scenario {
            Scenario::BdReference(s) => {
                check_n_max(s.n_max, "BdReference.n_max")?;
                if !(s.horizon >= 0.0) {
                    return cfg_err("BdReference.horizon: must be nonnegative");
                }
                check_solver(&s.solver, "BdReference.solver")?;
                s.initial.validate("BdReference.initial")
            }
            Scenario::SplittingConvergence(s) => {
                check_n_max(s.n_max, "SplittingConvergence.n_max")?;
                if s.dt_list.len() < 2 || s.dt_list.iter().any(|d| !(*d > 0.0)) {
                    return cfg_err("SplittingConvergence.dt_list: need at least two positive steps");
                }
                if !(s.horizon > 0.0) {
                    return cfg_err("SplittingConvergence.horizon: must be positive");
                }
                check_solver(&s.chi, "SplittingConvergence.chi")?;
                check_solver(&s.reference, "SplittingConvergence.reference")?;
                if s.chi.method == Method::MatrixExponentialOracle && s.n_max > 65 {
                    return cfg_err("SplittingConvergence.chi: matrix exponential oracle needs n_max <= 65");
                }
                if s.reference.method == Method::MatrixExponentialOracle {
                    return cfg_err(
                        "SplittingConvergence.reference: full dynamics are nonlinear, use an adaptive method",
                    );
                }
                s.initial.validate("SplittingConvergence.initial")
            }
            Scenario::FpVsBdVsLsw(s) => {
                check_n_max(s.n_max, "FpVsBdVsLsw.n_max")?;
                if s.n0 < 2 || s.n0 + 8 > s.n_max {
                    return cfg_err("FpVsBdVsLsw.n0: need 2 <= n0 and n0 + 8 <= n_max");
                }
                if s.cells_per_unit == 0 {
                    return cfg_err("FpVsBdVsLsw.cells_per_unit: must be positive");
                }
                match s.horizon {
                    Horizon::Time(t) | Horizon::FractionOfG(t) if !(t >= 0.0) => {
                        return cfg_err("FpVsBdVsLsw.horizon: must be nonnegative")
                    }
                    _ => {}
                }
                check_solver(&s.bd_solver, "FpVsBdVsLsw.bd_solver")?;
                s.initial.validate("FpVsBdVsLsw.initial")
            }
            Scenario::DiffusionResiduals(s) => {
                check_setup(&s.setup, "DiffusionResiduals.setup")?;
                if !(s.snapshot_cadence > 0.0 && s.snapshot_cadence < s.setup.t) {
                    return cfg_err("DiffusionResiduals.snapshot_cadence: must lie in (0, t)");
                }
                s.probes.validate("DiffusionResiduals.probes")
            }
            Scenario::DecayProbe(s) => {
                check_setup(&s.setup, "DecayProbe.setup")?;
                s.probes.validate("DecayProbe.probes")
            }
            Scenario::McCrossCheck(s) => {
                check_setup(&s.setup, "McCrossCheck.setup")?;
                if s.n_samples < 2 || !(s.dt_sde > 0.0) {
                    return cfg_err("McCrossCheck: n_samples >= 2 and dt_sde > 0 required");
                }
                if s.antithetic && s.n_samples % 2 != 0 {
                    return cfg_err("McCrossCheck.n_samples: must be even with antithetic sampling");
                }
                if s.probes.is_empty() {
                    return cfg_err("McCrossCheck.probes: at least one probe point required");
                }
                Ok(())
            }
            Scenario::AssumptionAudit(s) => {
                check_n_max(s.n_max, "AssumptionAudit.n_max")?;
                if !(s.m >= 1.0) {
                    return cfg_err("AssumptionAudit.m: must be at least 1");
                }
                Ok(())
            }
        }
    }

    /// Compact canonical JSON of the spec.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}
