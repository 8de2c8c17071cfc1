//! Discrete evaluation of energy-variational inequalities, measure-valued
//! weak formulations, varifold compatibility and relative energies.

pub mod basis;
pub mod compatibility;
pub mod elastic;
pub mod engine;
pub mod liquid_crystal;

pub use basis::{
    BasisSpec, DerivativeMode, Profile, Slot, SpatialFunction, SpatialMode, TestBasis, TestFields, TrigKind, TrigMode,
};
pub use compatibility::{compatibility_check, probe_modes};
pub use elastic::{
    evi_residual_elastic, evi_residual_polyconvex, lp_norm, mvs_residual_elastic, relative_energy, ElasticEvi,
    MeasureValuedEvi, MvsReport, PolyconvexEvi, RelativeEnergy,
};
pub use engine::{
    assemble, evaluate_basis, residual_profile, scaling_limit, EviSystem, NodeSeries, ResidualProfile, SharedSeries,
    ViolationReport, ViolationRow,
};
pub use liquid_crystal::{evi_residual_liquid_crystal, molecular_field, DirectorTrajectory, LiquidCrystalEvi};
