//! Experiment configuration, read from TOML.
//!
//! Every table and key is optional; missing values take the defaults below.
//!
//! ```toml
//! seed = 0
//! max_sites = 6
//!
//! [chain]
//! n_sites = 3
//! field = [0.5, 0.0, -2.55]
//! coupling = 0.25
//! g = 0.05
//! nbar = 0.5
//!
//! [model]
//! hamiltonian_locality = 2
//! jump_locality = 1
//! gamma_constraint = "unconstrained-complex"
//!
//! [steady]
//! input_locality = 4
//! stride = 1
//!
//! [noise]
//! # 0 followed by quarter decades from 1e-6 to 1e-3
//! sigma_grid = [0.0, 1e-6, 1.778e-6, 3.162e-6]
//! seeds = 20
//! disorder_mode = "seeds"
//! disorder_width = 0.1
//!
//! [dynamic]
//! input_locality = 2
//! dt = 3.9215686274509805e-4
//! order = 2
//! sizes = [2, 3, 4]
//! dt_grid = [3.9215686274509805e-4, 1e-3, 0.01, 0.05, 0.1, 0.15, 0.2, 0.3]
//! solvers = ["lsq", "psd"]
//!
//! [fd_variance]
//! samples = 1000000
//! sigma = 1.0
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::SpinChainSpec;
use crate::error::{Error, Result};
use crate::estimators::metrics::MIN_VARIANCE_SAMPLES;
use crate::estimators::{GammaConstraint, ModelSpace, SolverKind};
use crate::pauli::DEFAULT_DENSE_CAP;

pub const DEFAULT_FIELD: [f64; 3] = [0.5, 0.0, -2.55];
pub const DEFAULT_COUPLING: f64 = 0.25;
pub const DEFAULT_G: f64 = 0.05;
pub const DEFAULT_NBAR: f64 = 0.5;
/// `1e-3 / |c_z|` for the default field.
pub const DEFAULT_DT: f64 = 1e-3 / 2.55;
pub const DEFAULT_MAX_SITES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SteadySweep,
    NoiseSweep,
    DynamicSize,
    DynamicDt,
    FdVariance,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SteadySweep => "steady-sweep",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::DynamicSize => "dynamic-size",
            ExperimentKind::DynamicDt => "dynamic-dt",
            ExperimentKind::FdVariance => "fd-variance",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What varies between the configurations of a noise sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisorderMode {
    /// Fixed model, one noise stream per seed.
    #[default]
    Seeds,
    /// Fields and couplings perturbed per seed, plus a noise stream.
    Models,
}

impl FromStr for DisorderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seeds" => Ok(DisorderMode::Seeds),
            "models" => Ok(DisorderMode::Models),
            _ => Err(Error::InvalidParameter(format!("unknown disorder mode {s:?} (expected seeds or models)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub field: [f64; 3],
    pub coupling: f64,
    pub g: f64,
    pub nbar: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_sites: 3, field: DEFAULT_FIELD, coupling: DEFAULT_COUPLING, g: DEFAULT_G, nbar: DEFAULT_NBAR }
    }
}

impl ChainConfig {
    pub fn spec(&self, n_sites: usize) -> SpinChainSpec {
        SpinChainSpec::uniform(n_sites, self.field, self.coupling, self.g, self.nbar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hamiltonian_locality: usize,
    pub jump_locality: usize,
    pub gamma_constraint: GammaConstraint,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hamiltonian_locality: 2, jump_locality: 1, gamma_constraint: GammaConstraint::UnconstrainedComplex }
    }
}

impl ModelConfig {
    pub fn model(&self, n_sites: usize) -> Result<ModelSpace> {
        ModelSpace::local(n_sites, self.hamiltonian_locality.min(n_sites), self.jump_locality, self.gamma_constraint)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    /// Largest input locality; clamped to the chain length.
    pub input_locality: usize,
    pub stride: usize,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        Self { input_locality: 4, stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_grid: Vec<f64>,
    pub seeds: usize,
    pub disorder_mode: DisorderMode,
    /// Half-width of the uniform perturbation applied to every field
    /// component and coupling in `models` mode.
    pub disorder_width: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        let mut sigma_grid = vec![0.0];
        sigma_grid.extend((0..=12).map(|k| 10f64.powf(-6.0 + 0.25 * k as f64)));
        Self { sigma_grid, seeds: 20, disorder_mode: DisorderMode::Seeds, disorder_width: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicConfig {
    pub input_locality: usize,
    pub dt: f64,
    /// Stencil order used by the size sweep; the dt sweep runs both.
    pub order: u8,
    pub sizes: Vec<usize>,
    pub dt_grid: Vec<f64>,
    pub solvers: Vec<SolverKind>,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            input_locality: 2,
            dt: DEFAULT_DT,
            order: 2,
            sizes: vec![2, 3, 4],
            dt_grid: vec![DEFAULT_DT, 1e-3, 1e-2, 0.05, 0.1, 0.15, 0.2, 0.3],
            solvers: vec![SolverKind::LeastSquares, SolverKind::PsdConstrained],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdVarianceConfig {
    pub samples: usize,
    pub sigma: f64,
}

impl Default for FdVarianceConfig {
    fn default() -> Self {
        Self { samples: 1_000_000, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub max_sites: Option<usize>,
    pub chain: ChainConfig,
    pub model: ModelConfig,
    pub steady: SteadyConfig,
    pub noise: NoiseConfig,
    pub dynamic: DynamicConfig,
    pub fd_variance: FdVarianceConfig,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn check_grid(name: &str, grid: &[f64], strictly_positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(format!("{name} is empty; give at least one value")));
    }
    for &v in grid {
        let ok = v.is_finite() && if strictly_positive { v > 0.0 } else { v >= 0.0 };
        if !ok {
            let bound = if strictly_positive { "> 0" } else { ">= 0" };
            return Err(invalid(format!("{name} contains {v}; every entry must be finite and {bound}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config { path: path.to_owned(), msg: e.to_string() })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is plain data")
    }

    pub fn site_cap(&self) -> usize {
        self.max_sites.unwrap_or(DEFAULT_MAX_SITES)
    }

    fn check_sites(&self, n: usize) -> Result<()> {
        let cap = self.site_cap();
        if n == 0 {
            return Err(invalid("chain length must be at least 1"));
        }
        if n > cap {
            return Err(invalid(format!("chain length {n} exceeds the site cap {cap}; raise it with --max-sites")));
        }
        Ok(())
    }

    /// Checks the settings used by `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let cap = self.site_cap();
        if cap > DEFAULT_DENSE_CAP {
            return Err(invalid(format!("site cap {cap} is above the dense-matrix limit {DEFAULT_DENSE_CAP}")));
        }
        let c = &self.chain;
        if !(c.g.is_finite() && c.g >= 0.0) {
            return Err(invalid(format!("chain.g = {} must be a finite rate >= 0", c.g)));
        }
        if !(c.nbar.is_finite() && c.nbar >= 0.0) {
            return Err(invalid(format!("chain.nbar = {} must be a finite occupation >= 0", c.nbar)));
        }
        if !(c.field.iter().all(|v| v.is_finite()) && c.coupling.is_finite()) {
            return Err(invalid("chain.field and chain.coupling must be finite"));
        }
        if self.model.hamiltonian_locality == 0 {
            return Err(invalid("model.hamiltonian_locality must be at least 1"));
        }
        if self.model.jump_locality != 1 {
            return Err(invalid(format!("model.jump_locality = {} is not supported; only 1", self.model.jump_locality)));
        }
        match kind {
            ExperimentKind::SteadySweep | ExperimentKind::NoiseSweep => {
                self.check_sites(c.n_sites)?;
                if self.steady.input_locality == 0 {
                    return Err(invalid("steady.input_locality must be at least 1"));
                }
                if self.steady.stride == 0 {
                    return Err(invalid("steady.stride must be at least 1"));
                }
                if kind == ExperimentKind::NoiseSweep {
                    check_grid("noise.sigma_grid", &self.noise.sigma_grid, false)?;
                    if self.noise.seeds == 0 {
                        return Err(invalid("noise.seeds must be at least 1"));
                    }
                    let w = self.noise.disorder_width;
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(invalid(format!("noise.disorder_width = {w} must be finite and >= 0")));
                    }
                }
            }
            ExperimentKind::DynamicSize | ExperimentKind::DynamicDt => {
                let d = &self.dynamic;
                if d.input_locality == 0 {
                    return Err(invalid("dynamic.input_locality must be at least 1"));
                }
                if d.solvers.is_empty() {
                    return Err(invalid("dynamic.solvers is empty; choose from lsq, psd"));
                }
                if d.solvers.contains(&SolverKind::SvdNull) {
                    return Err(invalid("dynamic.solvers: svd-null needs a homogeneous system; use lsq or psd"));
                }
                if kind == ExperimentKind::DynamicSize {
                    if d.sizes.is_empty() {
                        return Err(invalid("dynamic.sizes is empty; give at least one chain length"));
                    }
                    for &n in &d.sizes {
                        self.check_sites(n)?;
                    }
                    check_grid("dynamic.dt", &[d.dt], true)?;
                    if !(d.order == 1 || d.order == 2) {
                        return Err(invalid(format!("dynamic.order = {} must be 1 or 2", d.order)));
                    }
                } else {
                    self.check_sites(c.n_sites)?;
                    check_grid("dynamic.dt_grid", &d.dt_grid, true)?;
                }
            }
            ExperimentKind::FdVariance => {
                let f = &self.fd_variance;
                if f.samples < MIN_VARIANCE_SAMPLES {
                    return Err(invalid(format!(
                        "fd_variance.samples = {} is below the minimum {MIN_VARIANCE_SAMPLES}",
                        f.samples
                    )));
                }
                check_grid("fd_variance.sigma", &[f.sigma], true)?;
            }
        }
        Ok(())
    }
}
