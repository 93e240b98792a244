//! Solution of the assembled system, discrete inf-sup analysis, the a priori
//! estimate and convergence studies.

pub mod benchmarks;
mod stability;
mod studies;

use crate::discretization::{DiscreteSystem, SpaceTimeMesh};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::linalg::{dot, mul_vec, norm2, quadratic_form, BandedLu};
use crate::motion::Side;

pub use stability::{discrete_inf_sup, inf_sup_dense, inf_sup_iterative, svd_oracle, InfSup, InfSupMethod, DENSE_CAP};
pub use studies::{
    convergence_study, energy_residual, inactive_residual, shift_equivalence, stability_study, ConvergenceRow,
    ConvergenceTable, ShiftReport, StabilityReport, StabilityRow,
};

/// Relative residual accepted from the direct solve.
pub const SOLVE_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 2;

/// A discrete solution: trial coefficients on a moving space-time mesh.
#[derive(Debug, Clone)]
pub struct SolutionField {
    mesh: SpaceTimeMesh,
    coeffs: Vec<f64>,
    trial_rate: f64,
}

impl SolutionField {
    pub fn new(mesh: SpaceTimeMesh, coeffs: Vec<f64>, trial_rate: f64) -> Result<Self> {
        if coeffs.len() != mesh.trial_dim() {
            return Err(Error::Internal(format!(
                "{} coefficients for a trial space of dimension {}",
                coeffs.len(),
                mesh.trial_dim()
            )));
        }
        Ok(Self {
            mesh,
            coeffs,
            trial_rate,
        })
    }

    pub fn mesh(&self) -> &SpaceTimeMesh {
        &self.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Nodal value at level `n`, node `node` (zero on Dirichlet nodes).
    pub fn nodal(&self, n: usize, node: usize) -> f64 {
        match self.mesh.dof(node) {
            Some(d) => (self.trial_rate * self.mesh.times()[n]).exp() * self.coeffs[self.mesh.trial_index(n, d)],
            None => 0.0,
        }
    }

    fn raw(&self, n: usize, node: usize) -> f64 {
        match self.mesh.dof(node) {
            Some(d) => self.coeffs[self.mesh.trial_index(n, d)],
            None => 0.0,
        }
    }

    /// `(u, ∂ₜu, ∂ₓu)` at `(x, t)`, taking the cell on `side` of a node.
    fn eval(&self, x: f64, t: f64, side: Side) -> (f64, f64, f64) {
        let mesh = &self.mesh;
        let n = mesh.slab_of(t);
        let (pos, vel) = mesh.nodes_at(n, t);
        let cells = mesh.n_x();
        let k = pos.partition_point(|&p| p < x);
        let e = if k < pos.len() && pos[k] == x && side == Side::Two { k } else { k.saturating_sub(1) };
        let e = e.min(cells - 1);
        let (x0, x1) = (pos[e], pos[e + 1]);
        let h = x1 - x0;
        let hats = [(x1 - x) / h, (x - x0) / h];
        let slopes = [-1.0 / h, 1.0 / h];
        let speed = vel[e] * hats[0] + vel[e + 1] * hats[1];
        let dt = mesh.dt(n);
        let s = (t - mesh.times()[n]) / dt;
        let ell = [1.0 - s, s];
        let dell = [-1.0 / dt, 1.0 / dt];
        let (mut u, mut ut_level, mut ux) = (0.0, 0.0, 0.0);
        for a in 0..2 {
            for m in 0..2 {
                let c = self.raw(n + m, e + a);
                u += c * ell[m] * hats[a];
                ux += c * ell[m] * slopes[a];
                ut_level += c * dell[m] * hats[a];
            }
        }
        let w = (self.trial_rate * t).exp();
        let ut = self.trial_rate * u + ut_level - ux * speed;
        (w * u, w * ut, w * ux)
    }
}

impl SpaceTimeField for SolutionField {
    fn value(&self, x: f64, t: f64, side: Side) -> f64 {
        self.eval(x, t, side).0
    }

    fn dt(&self, x: f64, t: f64, side: Side) -> f64 {
        self.eval(x, t, side).1
    }

    fn dx(&self, x: f64, t: f64, side: Side) -> f64 {
        self.eval(x, t, side).2
    }

    fn space_breaks(&self, t: f64) -> Vec<f64> {
        let n = self.mesh.slab_of(t);
        self.mesh.nodes_at(n, t).0
    }

    fn time_breaks(&self) -> Vec<f64> {
        self.mesh.times().to_vec()
    }
}

fn instability(system: &DiscreteSystem, reason: impl Into<String>) -> Error {
    Error::Instability {
        reason: reason.into(),
        n_x: system.mesh.n_x(),
        n_t: system.mesh.n_t(),
        dim: system.dim(),
    }
}

/// Factor the system matrix, mapping a singular pivot to a discrete
/// instability.
pub fn factor(system: &DiscreteSystem) -> Result<BandedLu> {
    BandedLu::factor(&system.matrix).map_err(|e| instability(system, e.to_string()))
}

/// Direct banded solve with iterative refinement.
pub fn solve(system: &DiscreteSystem) -> Result<SolutionField> {
    let rhs_norm = norm2(&system.rhs);
    if rhs_norm == 0.0 {
        return SolutionField::new(system.mesh.clone(), vec![0.0; system.dim()], system.options.trial_rate);
    }
    let lu = factor(system)?;
    let mut u = lu.solve(&system.rhs);
    let residual = |u: &[f64]| -> Vec<f64> {
        mul_vec(&system.matrix, u).iter().zip(&system.rhs).map(|(a, b)| b - a).collect()
    };
    let mut r = residual(&u);
    for _ in 0..REFINEMENT_STEPS {
        if norm2(&r) <= SOLVE_TOL * rhs_norm {
            break;
        }
        let du = lu.solve(&r);
        u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
        r = residual(&u);
    }
    let rel = norm2(&r) / rhs_norm;
    if !(rel <= SOLVE_TOL) {
        return Err(instability(system, format!("relative residual {rel:e} after refinement")));
    }
    log::debug!("solved {}×{} system, relative residual {rel:e}", system.dim(), system.dim());
    SolutionField::new(system.mesh.clone(), u, system.options.trial_rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriRecord {
    /// `‖u_h‖_X`.
    pub lhs: f64,
    /// `(‖g₁‖_{L²(J,V'),h} + ‖g₂‖_{L²(Σ₀)}) / c_B,h`.
    pub rhs: f64,
    /// `‖f_h‖_{Y_h'} / c_B,h`, the bound with the exact discrete data norm.
    pub discrete_rhs: f64,
    pub satisfied: bool,
}

/// Compare `‖u_h‖_X` with the data bound of the a priori estimate.
pub fn apriori_check(sol: &SolutionField, system: &DiscreteSystem, c_bh: f64) -> Result<AprioriRecord> {
    if !(c_bh > 0.0) {
        return Err(Error::domain(format!("inf-sup constant {c_bh} must be positive")));
    }
    let (m_x, m_y) = system.norm_matrices()?;
    let lhs = quadratic_form(m_x, sol.coefficients()).max(0.0).sqrt();
    let data = system.g1_dual + system.g2_norm;
    let rhs = data / c_bh;
    let discrete_rhs = if norm2(&system.rhs) == 0.0 {
        0.0
    } else {
        let lu = BandedLu::factor(m_y).map_err(|_| Error::Internal("Y-Gram matrix is singular".into()))?;
        dot(&system.rhs, &lu.solve(&system.rhs)).max(0.0).sqrt() / c_bh
    };
    Ok(AprioriRecord {
        lhs,
        rhs,
        discrete_rhs,
        satisfied: lhs <= rhs * (1.0 + 1e-8),
    })
}
