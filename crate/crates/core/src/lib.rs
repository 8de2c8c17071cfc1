pub mod coarse;
pub mod energy;
pub mod error;
pub mod evi;
pub mod integrator;
pub mod linalg;
pub mod measure;
pub mod nnls;
pub mod torus;

pub use coarse::{CoarseData, YoungMeasureField};
pub use energy::{ConvexElasticModel, LiquidCrystalModel, PolyconvexModel};
pub use error::{Error, Result};
pub use integrator::{ElasticState, Integrator, Trajectory};
pub use torus::{Rank, TorusField, TorusGrid};
