//! Experiment configuration: one TOML table per pipeline stage.

use std::path::{Path, PathBuf};

use genesol_core::energy::ConvexElasticModel;
use genesol_core::evi::{BasisSpec, DerivativeMode, Slot};
use genesol_core::integrator::CapPolicy;
use genesol_core::TorusGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum ModelKind {
    Quadratic,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    #[serde(default)]
    pub delta: f64,
}

impl ModelConfig {
    pub fn build(&self) -> genesol_core::Result<ConvexElasticModel> {
        match self.kind {
            ModelKind::Quadratic => ConvexElasticModel::quadratic(self.dim),
            ModelKind::Regularized => ConvexElasticModel::regularized(self.dim, self.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per axis.
    pub n: usize,
    #[serde(default = "one")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum InitialKind {
    Manufactured,
    Oscillatory,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default = "half")]
    pub amplitude: f64,
    /// Oscillation wavelength in cells.
    #[serde(default)]
    pub wavelength: Option<usize>,
    /// Trajectory file whose last node is the initial state.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Amplitude of a seeded uniform perturbation added to the velocity.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum CapChoice {
    Reject,
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub viscosity: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "reject")]
    pub cap_policy: CapChoice,
}

impl IntegratorConfig {
    pub fn cap_policy(&self) -> CapPolicy {
        match self.cap_policy {
            CapChoice::Reject => CapPolicy::Reject,
            CapChoice::Clamp => CapPolicy::Clamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarsenConfig {
    pub block: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    #[serde(default = "atom_budget")]
    pub atom_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotName {
    Velocity,
    Strain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeName {
    Discrete,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "max_index")]
    pub max_index: u32,
    #[serde(default = "default_slots")]
    pub slots: Vec<SlotName>,
    #[serde(default = "discrete")]
    pub derivatives: DerivativeName,
    #[serde(default = "one_usize")]
    pub hat_stride: usize,
    /// Weight in front of `‖∇φ‖`; sampled from the model when absent.
    #[serde(default)]
    pub weight_constant: Option<f64>,
    /// Bound on the energy-variational `max_violation`.
    #[serde(default)]
    pub max_violation: Option<f64>,
    /// Bound on the measure-valued residual of the coarse data, when set.
    #[serde(default)]
    pub mvs_max_violation: Option<f64>,
    /// Largest allowed increase of `E` between nodes.
    #[serde(default = "energy_increase")]
    pub energy_increase: f64,
}

impl VerifyConfig {
    pub fn basis_spec(&self) -> BasisSpec {
        BasisSpec {
            max_index: self.max_index,
            slots: self
                .slots
                .iter()
                .map(|s| match s {
                    SlotName::Velocity => Slot::Velocity,
                    SlotName::Strain => Slot::Strain,
                })
                .collect(),
            hat_stride: self.hat_stride,
            derivatives: match self.derivatives {
                DerivativeName::Discrete => DerivativeMode::Discrete,
                DerivativeName::Analytic => DerivativeMode::Analytic,
            },
            ..BasisSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: PathBuf,
    #[serde(default)]
    pub measures: Option<PathBuf>,
    pub report: PathBuf,
    /// Tab-separated columns for plotting.
    #[serde(default)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub coarsen: Option<CoarsenConfig>,
    #[serde(default)]
    pub construct: Option<ConstructConfig>,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn reject() -> CapChoice {
    CapChoice::Reject
}
fn atom_budget() -> usize {
    16
}
fn max_index() -> u32 {
    3
}
fn default_slots() -> Vec<SlotName> {
    vec![SlotName::Velocity, SlotName::Strain]
}
fn discrete() -> DerivativeName {
    DerivativeName::Discrete
}
fn energy_increase() -> f64 {
    1e-12
}

/// A parsed configuration together with its source bytes and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self { config, hash: hex::encode(Sha256::digest(&bytes)), dir };
        loaded.validate()?;
        Ok(loaded)
    }

    /// Output and input paths are relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        let bad = |m: String| Err(CliError::Config(m));
        c.model.build().map_err(|e| CliError::Config(format!("[model]: {e}")))?;
        if c.model.kind == ModelKind::Quadratic && c.model.delta != 0.0 {
            return bad("[model] delta only applies to the regularized model".into());
        }
        TorusGrid::uniform(c.model.dim, c.grid.n, c.grid.length).map_err(|e| CliError::Config(format!("[grid]: {e}")))?;
        let init = &c.initial;
        if !init.amplitude.is_finite() || !(init.noise.is_finite() && init.noise >= 0.0) {
            return bad("[initial] amplitude must be finite and noise non-negative".into());
        }
        match init.kind {
            InitialKind::Manufactured if c.model.dim != 1 => {
                return bad("[initial] the manufactured solution needs dim = 1".into());
            }
            InitialKind::Oscillatory if init.wavelength.is_none() => {
                return bad("[initial] oscillatory data needs a wavelength".into());
            }
            InitialKind::File => {
                let Some(p) = &init.path else {
                    return bad("[initial] kind = \"file\" needs a path".into());
                };
                let p = self.resolve(p);
                if !p.is_file() {
                    return Err(CliError::Read {
                        path: p,
                        source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                    });
                }
            }
            _ => {}
        }
        let it = &c.integrator;
        if !(it.dt.is_finite() && it.dt > 0.0) {
            return bad(format!("[integrator] dt must be positive, got {}", it.dt));
        }
        if it.steps == 0 || it.steps > 1_000_000 {
            return bad(format!("[integrator] steps must be in 1..=1000000, got {}", it.steps));
        }
        if !(it.viscosity.is_finite() && it.viscosity >= 0.0) {
            return bad("[integrator] viscosity must be non-negative".into());
        }
        if let Some(co) = &c.coarsen {
            if co.block == 0 || c.grid.n % co.block != 0 {
                return bad(format!("[coarsen] block {} must divide n = {}", co.block, c.grid.n));
            }
        }
        if let Some(cons) = &c.construct {
            if c.coarsen.is_none() {
                return bad("[construct] needs a [coarsen] stage".into());
            }
            if cons.atom_budget < 3 {
                return bad("[construct] atom_budget must be at least 3".into());
            }
        }
        let v = &c.verify;
        if v.slots.is_empty() {
            return bad("[verify] slots must not be empty".into());
        }
        if v.max_index == 0 || v.max_index > 16 {
            return bad("[verify] max_index must be in 1..=16".into());
        }
        if let Some(w) = v.weight_constant {
            if !(w.is_finite() && w >= 0.0) {
                return bad("[verify] weight_constant must be non-negative".into());
            }
        }
        for (name, b) in [("max_violation", v.max_violation), ("mvs_max_violation", v.mvs_max_violation)] {
            if let Some(b) = b {
                if !(b.is_finite() && b >= 0.0) {
                    return bad(format!("[verify] {name} must be non-negative"));
                }
            }
        }
        if v.mvs_max_violation.is_some() && c.coarsen.is_none() {
            return bad("[verify] mvs_max_violation needs a [coarsen] stage".into());
        }
        if !(v.energy_increase.is_finite() && v.energy_increase >= 0.0) {
            return bad("[verify] energy_increase must be non-negative".into());
        }
        if c.construct.is_some() && c.output.measures.is_none() {
            return bad("[output] measures is required when [construct] is present".into());
        }
        Ok(())
    }
}
