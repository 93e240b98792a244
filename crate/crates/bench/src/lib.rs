//! Fixtures shared by the benchmarks.

use eip_core::discretization::{AssemblyOptions, SpaceTimeMesh};
use eip_core::solver::benchmarks::{Benchmark, Problem};
use eip_core::Result;

/// Mesh sizes swept by the assembly and solve benchmarks.
pub const LEVELS: [usize; 3] = [8, 16, 32];

pub fn fixture(bench: Benchmark, n: usize) -> Result<(Problem, SpaceTimeMesh)> {
    let p = bench.problem()?;
    let mesh = p.mesh(n, n)?;
    Ok((p, mesh))
}

pub fn operator_only() -> AssemblyOptions {
    AssemblyOptions { norms: false, ..AssemblyOptions::default() }
}
