//! Young measures matched to prescribed moments, defect recovery, varifolds
//! and Gaussian sample measures.

pub mod defect;
pub mod gaussian;
pub mod moments;
pub mod varifold;

pub use defect::{negative_part, psd_projection, recover_defect, DefectField, DefectRecovery, NormKind};
pub use gaussian::{exact_second_moment, gaussian_measure, psd_sqrt, GaussianMeasure};
pub use moments::{
    match_moments, ElasticMoments, MatchStage, MomentMatch, MomentModel, MomentResiduals, ScalarToy,
    ENERGY_TOLERANCE, MOMENT_TOLERANCE,
};
pub use varifold::{build_varifold, InterfaceData, Varifold, VarifoldAtom};
