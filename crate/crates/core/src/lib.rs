//! Space-time analysis of parabolic problems on `(0, 1)` with a moving
//! interface and a discontinuous, possibly degenerate coefficient `α`.
//!
//! The crate covers interface kinematics ([`motion`]), the coefficient
//! ([`coefficient`]), the weighted time derivative and its companions
//! ([`calculus`]), the spatial operator ([`operator`]), interface-fitted
//! space-time assembly ([`discretization`]) and the solver with stability and
//! convergence studies ([`solver`]).

pub mod calculus;
pub mod coefficient;
pub mod discretization;
pub mod error;
pub mod field;
pub mod linalg;
pub mod motion;
pub mod operator;
pub mod quadrature;
pub mod solver;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use coefficient::{BranchFunction, BranchSample, GlobalConstants, PiecewiseCoefficient};
pub use error::{Error, Result};
pub use field::{CatalogField, SpaceTimeField, SpatialField, TimeBump};
pub use motion::{MotionFamily, MotionMap, Side};
pub use operator::{Boundary, OperatorConstants, ScalarField, SpatialOperator};
