//! Pointwise energy densities, their derivatives and stresses.

mod convex;
pub mod dnorm;
pub mod liquid_crystal;
pub mod polyconvex;

pub use convex::{
    estimate_convexity_constants, ConvexDensity, ConvexElasticModel, ConvexEval, ConvexityEstimate,
    SAFETY_MARGIN,
};
pub use dnorm::{d_norm, d_norm_dual, d_norm_primal, is_psd, DNorm};
pub use liquid_crystal::{unit_director, LiquidCrystalModel, OseenFrank};
pub use polyconvex::{cofactor, determinant, polyconvex_kinematics, Growth, Kinematics, PolyPartials, PolyconvexModel};
