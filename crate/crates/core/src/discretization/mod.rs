//! Interface-fitted moving space-time meshes, assembly of the discrete
//! variational problem and its norm matrices.

mod assembly;
pub mod dump;
mod mesh;

pub use assembly::{
    assemble_system, interpolate, meets_sigma0, AssemblyOptions, DiscreteSystem, FieldSource, InitialData, RowKind,
    Source, Spatial, Trace, Weighted, Zero,
};
pub use mesh::{SpaceTimeMesh, MIN_ELEMENT};
