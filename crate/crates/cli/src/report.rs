//! Machine-readable run report.

use genesol_core::evi::{ViolationReport, ViolationRow};
use serde::{Deserialize, Serialize};

pub const REPORT_FORMAT: &str = "genesol-report";
/// JSON schema the report is validated against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
/// Residual rows kept in a report, largest first.
pub const TOP_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub tolerance_scale: f64,
    pub max_violation: Option<f64>,
    pub mvs_max_violation: Option<f64>,
    pub energy_increase: f64,
    pub newton_target: f64,
    pub newton_failure: f64,
    pub moment: f64,
    pub moment_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSummary {
    pub dim: usize,
    pub extent: Vec<usize>,
    pub period: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSummary {
    pub nodes: usize,
    pub dt: f64,
    pub viscosity: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_energy_increase: f64,
    /// `|𝓔(end) − 𝓔(0)|` of the discrete energy.
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarsenSummary {
    pub block: usize,
    pub coarse_extent: Vec<usize>,
    pub min_surplus: f64,
    pub max_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructSummary {
    pub cells: usize,
    pub max_atoms: usize,
    pub max_moment_residual: f64,
    pub max_energy_residual: f64,
    pub total_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSummary {
    pub function: String,
    pub profile: String,
    pub max_residual: f64,
    pub s: usize,
    pub t: usize,
}

impl From<&ViolationRow> for RowSummary {
    fn from(r: &ViolationRow) -> Self {
        Self { function: r.function.clone(), profile: r.profile.clone(), max_residual: r.max_residual, s: r.s, t: r.t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySummary {
    pub weight_constant: f64,
    pub max_violation: f64,
    pub rows: usize,
    pub top: Vec<RowSummary>,
    pub mvs_max_violation: Option<f64>,
}

impl VerifySummary {
    pub fn new(report: &ViolationReport, mvs: Option<f64>) -> Self {
        let mut rows: Vec<&ViolationRow> = report.rows.iter().collect();
        rows.sort_by(|a, b| b.max_residual.total_cmp(&a.max_residual).then_with(|| a.function.cmp(&b.function)));
        Self {
            weight_constant: report.weight_constant,
            max_violation: report.max_violation,
            rows: report.rows.len(),
            top: rows.into_iter().take(TOP_ROWS).map(RowSummary::from).collect(),
            mvs_max_violation: mvs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub t: Vec<f64>,
    /// Auxiliary energy `E`.
    pub energy: Vec<f64>,
    pub discrete_energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// `∫` Jensen surplus of the coarse data per node.
    pub surplus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn check(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, passed: value <= bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub model_id: String,
    pub grid: GridSummary,
    pub tolerances: Tolerances,
    pub solve: SolveSummary,
    pub coarsen: Option<CoarsenSummary>,
    pub construct: Option<ConstructSummary>,
    pub verify: VerifySummary,
    pub series: Series,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl Report {
    /// Largest verifier violation recorded in the report.
    pub fn max_violation(&self) -> f64 {
        self.verify.max_violation.max(self.verify.mvs_max_violation.unwrap_or(0.0))
    }

    pub fn first_failure(&self) -> Option<&Assertion> {
        self.assertions.iter().find(|a| !a.passed)
    }
}
