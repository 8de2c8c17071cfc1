use thiserror::Error;

use crate::torus::Rank;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation does not support {0:?} fields")]
    UnsupportedRank(Rank),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("evaluation produced a non-finite value: {0}")]
    Evaluation(String),

    #[error("unit-length constraint violated: |d| = {norm}")]
    Constraint { norm: f64 },

    #[error("outside the domain of definition: {0}")]
    Domain(String),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("time step {dt:e} exceeds the stability cap {cap:e}")]
    StabilityCap { dt: f64, cap: f64 },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("moment problem infeasible within the atom budget (best residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("ill-conditioned test basis: {0}")]
    Conditioning(String),
}
