//! Manufactured benchmark problems.

use std::f64::consts::PI;

use crate::calculus::Boundary;
use crate::coefficient::PiecewiseCoefficient;
use crate::discretization::{assemble_system, AssemblyOptions, DiscreteSystem, Source, SpaceTimeMesh, Trace};
use crate::error::Result;
use crate::field::{CatalogField, SpaceTimeField};
use crate::motion::{MotionMap, Side};
use crate::operator::{ScalarField, SpatialOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Benchmark {
    /// `α = 1`, static interface, `u = sin(πx) e^{-t}`.
    Heat,
    /// `α = (1, 2)` under the separable flow, `u = sin(πx)(1 + t)`.
    M1,
    /// As `M1` with `k = (1, 3)` and a kinked solution with continuous flux.
    M2,
    /// `α = (1, 0)`: parabolic on side 1, elliptic on side 2.
    M3,
    /// Neumann problem with reaction whose solution `1 + x/2 + t` lies in the
    /// trial space.
    ExactLinear,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] = [
        Benchmark::Heat,
        Benchmark::M1,
        Benchmark::M2,
        Benchmark::M3,
        Benchmark::ExactLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Heat => "heat",
            Benchmark::M1 => "m1",
            Benchmark::M2 => "m2",
            Benchmark::M3 => "m3",
            Benchmark::ExactLinear => "exact_linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn flow() -> Result<MotionMap> {
        MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0)
    }

    pub fn problem(self) -> Result<Problem> {
        let laplacian = |a1: f64, a2: f64, motion: MotionMap| -> Result<SpatialOperator> {
            SpatialOperator::laplacian(PiecewiseCoefficient::constants(a1, a2, motion)?, Boundary::Dirichlet)
        };
        let (op, exact) = match self {
            Benchmark::Heat => (laplacian(1.0, 1.0, MotionMap::identity(0.5, 1.0)?)?, CatalogField::SinExp { k: 1.0 }),
            Benchmark::M1 => (laplacian(1.0, 2.0, Self::flow()?)?, CatalogField::SinLinear),
            Benchmark::M2 => {
                let flow = Self::flow()?;
                let op = SpatialOperator::new(
                    ScalarField::PerBranch { left: 1.0, right: 3.0 },
                    ScalarField::constant(0.0),
                    ScalarField::constant(0.0),
                    PiecewiseCoefficient::constants(1.0, 2.0, flow)?,
                    Boundary::Dirichlet,
                )?;
                (op, CatalogField::FluxJump { k1: 1.0, k2: 3.0, motion: flow })
            }
            Benchmark::M3 => (laplacian(1.0, 0.0, Self::flow()?)?, CatalogField::SinLinear),
            Benchmark::ExactLinear => {
                let op = SpatialOperator::new(
                    ScalarField::constant(1.0),
                    ScalarField::constant(0.0),
                    ScalarField::constant(1.0),
                    PiecewiseCoefficient::constants(1.0, 2.0, Self::flow()?)?,
                    Boundary::Neumann,
                )?;
                (op, CatalogField::Affine { c0: 1.0, cx: 0.5, ct: 1.0 })
            }
        };
        Ok(Problem {
            name: self.name().to_string(),
            op,
            exact,
        })
    }
}

/// A problem with known solution; the data are derived from `exact`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub op: SpatialOperator,
    pub exact: CatalogField,
}

impl Problem {
    pub fn motion(&self) -> &MotionMap {
        self.op.coefficient().motion()
    }

    pub fn mesh(&self, n_x: usize, n_t: usize) -> Result<SpaceTimeMesh> {
        SpaceTimeMesh::build(n_x, n_t, self.motion(), self.op.boundary())
    }

    pub fn source(&self) -> Manufactured<'_> {
        Manufactured {
            exact: &self.exact,
            op: &self.op,
        }
    }

    pub fn assemble(&self, mesh: &SpaceTimeMesh, opts: AssemblyOptions) -> Result<DiscreteSystem> {
        assemble_system(mesh, &self.op, &self.source(), &Trace(&self.exact), opts)
    }
}

/// `g₁ = α∂ₜu − ∂ₓ(k∂ₓu) + b∂ₓu + ĉu` per branch, with the boundary flux
/// `(−k∂ₓu(0), k∂ₓu(1))` carried by the Neumann functional.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured<'a> {
    pub exact: &'a CatalogField,
    pub op: &'a SpatialOperator,
}

impl Source for Manufactured<'_> {
    fn density(&self, x: f64, t: f64, side: Side) -> f64 {
        let u = self.exact;
        let op = self.op;
        let (k, kx) = (op.diffusion().value(x, t, side), op.diffusion().dx(x, t, side));
        let ux = u.dx(x, t, side);
        op.coefficient().value(x, t, side) * u.dt(x, t, side) - k * u.dxx(x, t, side) - kx * ux
            + op.advection().value(x, t, side) * ux
            + op.effective_reaction(x, t, side) * u.value(x, t, side)
    }

    fn boundary(&self, t: f64) -> (f64, f64) {
        let flux = |x: f64, side| self.op.diffusion().value(x, t, side) * self.exact.dx(x, t, side);
        (-flux(0.0, Side::One), flux(1.0, Side::Two))
    }
}
