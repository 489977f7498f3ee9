//! Experiment configuration: one TOML file with `scenario`, `[model]`,
//! `[coefficients]`, `[coupling]`, `[sim]`, `[params]` and `[output]`.
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficient_field::{CoefficientField, Diffusion, Drift};
use crate::coupling_kernel::CouplingKernel;
use crate::error::{invalid, Error, Result};
use crate::levy_model::{LevyModel, SupportVariant};
use crate::linalg::Vector;
use crate::sde_simulator::SimConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Marginality,
    DriftBound,
    Pushforward,
    JExponent,
    CouplingDecay,
    GradientRate,
    TvDecay,
    InvariantProbe,
    MarginalLaw,
    Coalescence,
    FullSuite,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::Marginality,
        Scenario::DriftBound,
        Scenario::Pushforward,
        Scenario::JExponent,
        Scenario::CouplingDecay,
        Scenario::GradientRate,
        Scenario::TvDecay,
        Scenario::InvariantProbe,
        Scenario::MarginalLaw,
        Scenario::Coalescence,
        Scenario::FullSuite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Marginality => "marginality",
            Scenario::DriftBound => "drift_bound",
            Scenario::Pushforward => "pushforward",
            Scenario::JExponent => "j_exponent",
            Scenario::CouplingDecay => "coupling_decay",
            Scenario::GradientRate => "gradient_rate",
            Scenario::TvDecay => "tv_decay",
            Scenario::InvariantProbe => "invariant_probe",
            Scenario::MarginalLaw => "marginal_law",
            Scenario::Coalescence => "coalescence",
            Scenario::FullSuite => "full_suite",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Scenario::Marginality => "coupled generator against the sum of marginal generators",
            Scenario::DriftBound => "Theta_0 and Theta_R bounds on the radial coupling generator",
            Scenario::Pushforward => "pushforward identity and equal masses of mu_Psi and mu_Psi^-1",
            Scenario::JExponent => "log-log slope of the coalescence mass J(r)",
            Scenario::CouplingDecay => "E|X_t-Y_t| decay against the contraction certificate",
            Scenario::GradientRate => "2P(T>t)/|x-y|^theta against the t^(-theta/alpha) shape",
            Scenario::TvDecay => "2P(T>t) exponential decay",
            Scenario::InvariantProbe => "agreement of long-run laws from different starts",
            Scenario::MarginalLaw => "law of the coupled Y against an independent simulation",
            Scenario::Coalescence => "bit-level branch bookkeeping of the coupled jumps",
            Scenario::FullSuite => "every acceptance check with its built-in presets",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default = "default_support")]
    pub support: SupportVariant,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one")]
    pub eta: f64,
}

fn default_support() -> SupportVariant {
    SupportVariant::Ball
}
fn default_dim() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { support: default_support(), dim: 1, alpha: 0.5, c0: 1.0, eta: 1.0 }
    }
}

impl MeasureConfig {
    pub fn build(&self) -> Result<LevyModel> {
        LevyModel::new(self.dim, self.alpha, self.c0, self.eta, self.support)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_support")]
    pub support: SupportVariant,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one")]
    pub eta: f64,
    /// The driving measure when the model above is only the coupling part.
    #[serde(default)]
    pub envelope: Option<MeasureConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::from(MeasureConfig::default())
    }
}

impl From<MeasureConfig> for ModelConfig {
    fn from(m: MeasureConfig) -> Self {
        ModelConfig { support: m.support, dim: m.dim, alpha: m.alpha, c0: m.c0, eta: m.eta, envelope: None }
    }
}

impl ModelConfig {
    pub fn measure(&self) -> MeasureConfig {
        MeasureConfig { support: self.support, dim: self.dim, alpha: self.alpha, c0: self.c0, eta: self.eta }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "default_drift")]
    pub drift: Drift,
    #[serde(default = "default_diffusion")]
    pub diffusion: Diffusion,
}

fn default_drift() -> Drift {
    Drift::SinPerturbed { rate: 1.0, amp: 1.0 }
}
fn default_diffusion() -> Diffusion {
    Diffusion::Constant { scale: 1.0 }
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig { drift: default_drift(), diffusion: default_diffusion() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default = "one")]
    pub kappa: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig { kappa: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Small-jump truncation.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_dt")]
    pub dt_max: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub coalesce_tol: Option<f64>,
}

fn default_horizon() -> f64 {
    10.0
}
fn default_delta() -> f64 {
    1e-3
}
fn default_dt() -> f64 {
    0.01
}
fn default_paths() -> usize {
    10_000
}
fn default_seed() -> u64 {
    42
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            horizon: default_horizon(),
            delta: default_delta(),
            dt_max: default_dt(),
            n_paths: default_paths(),
            seed: default_seed(),
            coalesce_tol: None,
        }
    }
}

impl SimSection {
    pub fn to_sim(&self) -> SimConfig {
        let mut s = SimConfig::new(self.horizon, self.dt_max, self.delta, self.seed, self.n_paths);
        s.coalesce_tol = self.coalesce_tol;
        s
    }
}

/// Scenario knobs; each scenario documents which ones it reads.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub starts: Option<Vec<Vec<f64>>>,
    pub theta: Option<f64>,
    pub distances: Option<Vec<f64>>,
    pub radii: Option<Vec<f64>>,
    pub n_pairs: Option<usize>,
    pub samples_per_radius: Option<usize>,
    pub window: Option<[f64; 2]>,
    pub grid_points: Option<usize>,
    pub rel_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            model: ModelConfig::default(),
            coefficients: CoefficientConfig::default(),
            coupling: CouplingConfig::default(),
            sim: SimSection::default(),
            params: Params::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds every object the scenario needs, so invalid parameters
    /// surface before any work starts.
    pub fn validate(&self) -> Result<()> {
        let k = self.kernel()?;
        self.sim.to_sim().validate(k.driving())?;
        if self.sim.n_paths == 0 {
            return Err(invalid("n_paths must be positive"));
        }
        let dim = self.model.dim;
        for (name, v) in [("x0", &self.params.x0), ("y0", &self.params.y0)] {
            if let Some(v) = v {
                if v.len() != dim {
                    return Err(invalid(format!("params.{name} has {} entries, model dim is {dim}", v.len())));
                }
            }
        }
        if let Some(starts) = &self.params.starts {
            if starts.iter().any(|s| s.len() != dim) {
                return Err(invalid(format!("params.starts entries must have {dim} components")));
            }
        }
        if let Some([a, b]) = self.params.window {
            if !(a >= 0.0 && b > a) {
                return Err(invalid(format!("params.window [{a}, {b}] must satisfy 0 <= lo < hi")));
            }
        }
        if let Some(t) = self.params.rel_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid("params.rel_tol must lie in (0,1)"));
            }
        }
        Ok(())
    }

    pub fn levy(&self) -> Result<LevyModel> {
        let m = self.model.measure().build()?;
        match &self.model.envelope {
            Some(e) => m.with_envelope(e.build()?),
            None => Ok(m),
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientField> {
        CoefficientField::new(self.model.dim, self.coefficients.drift.clone(), self.coefficients.diffusion.clone())
    }

    pub fn kernel(&self) -> Result<CouplingKernel> {
        CouplingKernel::new(self.levy()?, self.coefficients()?, self.coupling.kappa)
    }

    pub fn point(&self, v: &Option<Vec<f64>>, default: f64) -> Vector {
        match v {
            Some(s) => Vector::from_slice(s),
            None => Vector::splat(self.model.dim, default),
        }
    }
}
