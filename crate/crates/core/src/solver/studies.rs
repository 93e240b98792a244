use rayon::prelude::*;

use crate::calculus::{fitted_order, gram_matrix, ibp_residual, NormContext};
use crate::discretization::{assemble_system, AssemblyOptions, Source, Trace, Weighted};
use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::motion::Side;
use crate::quadrature::{gauss_legendre, split_nodes};

use super::benchmarks::Problem;
use super::stability::{discrete_inf_sup, InfSupMethod};
use super::{apriori_check, solve, AprioriRecord, SolutionField};

const ERROR_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub n_x: usize,
    pub n_t: usize,
    pub h: f64,
    /// `‖u_h − u‖_{L²(Q)}`.
    pub l2: f64,
    /// `‖u_h − u‖_{L²(J,V)}`.
    pub l2v: f64,
    /// `max_t ‖√α (u_h − u)(t)‖_{L²}`.
    pub weighted_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub order_l2: f64,
    pub order_l2v: f64,
    pub order_weighted_max: f64,
}

/// Errors of `sol` against `exact`, integrated cell-wise on the moving mesh.
pub fn solution_errors(sol: &SolutionField, exact: &dyn SpaceTimeField, problem: &Problem) -> ConvergenceRow {
    let mesh = sol.mesh();
    let coeff = problem.op.coefficient();
    let motion = mesh.motion();
    let at_time = |t: f64| -> (f64, f64, f64) {
        let n = mesh.slab_of(t);
        let pos = mesh.nodes_at(n, t).0;
        let gamma = motion.gamma(t);
        let (mut l2, mut h1, mut weighted) = (0.0, 0.0, 0.0);
        for e in 0..mesh.n_x() {
            for (x, w, side) in split_nodes(pos[e], pos[e + 1], gamma, &[], 1, ERROR_POINTS) {
                let d = sol.value(x, t, side) - exact.value(x, t, side);
                let dx = sol.dx(x, t, side) - exact.dx(x, t, side);
                l2 += w * d * d;
                h1 += w * dx * dx;
                weighted += w * coeff.value(x, t, side) * d * d;
            }
        }
        (l2, h1, weighted)
    };
    let (mut l2, mut l2v, mut wmax) = (0.0, 0.0, 0.0f64);
    for n in 0..mesh.n_t() {
        let (t0, t1) = (mesh.times()[n], mesh.times()[n + 1]);
        for (t, wt) in gauss_legendre(ERROR_POINTS).mapped(t0, t1) {
            let (a, b, c) = at_time(t);
            l2 += wt * a;
            l2v += wt * (a + b);
            wmax = wmax.max(c);
        }
    }
    for &t in mesh.times() {
        wmax = wmax.max(at_time(t).2);
    }
    ConvergenceRow {
        n_x: mesh.n_x(),
        n_t: mesh.n_t(),
        h: 1.0 / mesh.n_x() as f64,
        l2: l2.sqrt(),
        l2v: l2v.sqrt(),
        weighted_max: wmax.sqrt(),
    }
}

impl Problem {
    /// Assemble, solve and measure the error on one level.
    pub fn run_level(&self, n_x: usize, n_t: usize) -> Result<ConvergenceRow> {
        let mesh = self.mesh(n_x, n_t)?;
        let sys = self.assemble(
            &mesh,
            AssemblyOptions {
                norms: false,
                parallel: false,
                ..AssemblyOptions::default()
            },
        )?;
        let sol = solve(&sys)?;
        Ok(solution_errors(&sol, &self.exact, self))
    }
}

/// Errors on nested levels and least-squares observed orders.
pub fn convergence_study(problem: &Problem, levels: &[(usize, usize)]) -> Result<ConvergenceTable> {
    if levels.len() < 2 {
        return Err(Error::config("a convergence study needs at least two levels"));
    }
    for w in levels.windows(2) {
        let ((x0, t0), (x1, t1)) = (w[0], w[1]);
        if x1 != 2 * x0 || t1 != 2 * t0 {
            return Err(Error::config(format!(
                "levels ({x0}, {t0}) and ({x1}, {t1}) are not nested by a factor of two"
            )));
        }
    }
    let rows: Vec<ConvergenceRow> =
        levels.par_iter().map(|&(n_x, n_t)| problem.run_level(n_x, n_t)).collect::<Result<_>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let order = |f: fn(&ConvergenceRow) -> f64| fitted_order(&h, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceTable {
        order_l2: order(|r| r.l2),
        order_l2v: order(|r| r.l2v),
        order_weighted_max: order(|r| r.weighted_max),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StabilityRow {
    pub n_x: usize,
    pub n_t: usize,
    pub dim: usize,
    pub c_bh: f64,
    pub continuity: Option<f64>,
    pub method: InfSupMethod,
    pub apriori_lhs: f64,
    pub apriori_rhs: f64,
    pub apriori_discrete_rhs: f64,
    pub apriori_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// `max c_B,h / min c_B,h`.
    pub fn ratio(&self) -> f64 {
        let hi = self.rows.iter().map(|r| r.c_bh).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.rows.iter().map(|r| r.c_bh).fold(f64::INFINITY, f64::min);
        hi / lo
    }

    pub fn all_positive(&self) -> bool {
        self.rows.iter().all(|r| r.c_bh > 0.0)
    }

    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.apriori_satisfied)
    }
}

/// Inf-sup constant and a priori check with the manufactured data per level.
pub fn stability_study(problem: &Problem, levels: &[(usize, usize)]) -> Result<StabilityReport> {
    let rows = levels
        .par_iter()
        .map(|&(n_x, n_t)| {
            let mesh = problem.mesh(n_x, n_t)?;
            let sys = problem.assemble(
                &mesh,
                AssemblyOptions {
                    parallel: false,
                    ..AssemblyOptions::default()
                },
            )?;
            let infsup = discrete_inf_sup(&sys)?;
            let sol = solve(&sys)?;
            let AprioriRecord {
                lhs,
                rhs,
                discrete_rhs,
                satisfied,
            } = apriori_check(&sol, &sys, infsup.value)?;
            Ok(StabilityRow {
                n_x,
                n_t,
                dim: sys.dim(),
                c_bh: infsup.value,
                continuity: infsup.continuity,
                method: infsup.method,
                apriori_lhs: lhs,
                apriori_rhs: rhs,
                apriori_discrete_rhs: discrete_rhs,
                apriori_satisfied: satisfied,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StabilityReport { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ShiftReport {
    pub lambda0: f64,
    pub max_pointwise_gap: f64,
    pub max_value: f64,
}

/// Solve the problem and its `λ₀`-shifted form `α∂ₜû + (A + λ₀α)û = e^{−λ₀t}g₁`
/// and compare `u_h` with `e^{λ₀t} û_h` at every mesh node. The shifted
/// system is discretized with trial weight `e^{−λ₀t}` and test weight
/// `e^{λ₀t}`, which map the two discrete spaces onto each other.
pub fn shift_equivalence(problem: &Problem, lambda0: f64, n_x: usize, n_t: usize) -> Result<ShiftReport> {
    let mesh = problem.mesh(n_x, n_t)?;
    let plain = AssemblyOptions {
        norms: false,
        ..AssemblyOptions::default()
    };
    let u = solve(&problem.assemble(&mesh, plain)?)?;
    let shifted_op = problem.op.shifted_by(lambda0)?;
    let source = problem.source();
    let weighted = Weighted {
        source: &source as &dyn Source,
        rate: -lambda0,
    };
    let sys = assemble_system(
        &mesh,
        &shifted_op,
        &weighted,
        &Trace(&problem.exact),
        AssemblyOptions {
            trial_rate: -lambda0,
            test_rate: lambda0,
            ..plain
        },
    )?;
    let u_hat = solve(&sys)?;
    let mut gap = 0.0f64;
    let mut max_value = 0.0f64;
    for n in 0..=mesh.n_t() {
        let t = mesh.times()[n];
        for node in 0..=mesh.n_x() {
            let a = u.nodal(n, node);
            let b = (lambda0 * t).exp() * u_hat.nodal(n, node);
            gap = gap.max((a - b).abs());
            max_value = max_value.max(a.abs());
        }
    }
    Ok(ShiftReport {
        lambda0,
        max_pointwise_gap: gap,
        max_value,
    })
}

/// Residual of the integration by parts identity with `u = z = u_h` on `[0, T]`.
pub fn energy_residual(problem: &Problem, sol: &SolutionField) -> Result<f64> {
    let ctx = NormContext {
        boundary: problem.op.boundary(),
        ..NormContext::default()
    };
    ibp_residual(sol, sol, 0.0, problem.motion().horizon(), problem.op.coefficient(), &ctx)
}

/// Per time level, the discrete dual norm of the elliptic residual
/// `a(t_n; u_h(t_n), χ) − ⟨g₁(t_n), χ⟩` over hats `χ` supported in the
/// inactive branch.
pub fn inactive_residual(problem: &Problem, sol: &SolutionField) -> Result<Vec<f64>> {
    let coeff = problem.op.coefficient();
    let inactive = match (coeff.is_active(Side::One), coeff.is_active(Side::Two)) {
        (true, false) => Side::Two,
        (false, true) => Side::One,
        _ => return Err(Error::config("the coefficient has no inactive branch")),
    };
    let mesh = sol.mesh();
    let ig = mesh.interface_node();
    let source = problem.source();
    let nodes: Vec<usize> = match inactive {
        Side::Two => (ig + 1..mesh.n_x()).collect(),
        Side::One => (1..ig).collect(),
    };
    let mut out = Vec::with_capacity(mesh.n_t() + 1);
    for (n, &t) in mesh.times().iter().enumerate() {
        let pos = mesh.level(n);
        let mut r = vec![0.0; nodes.len()];
        for (k, &node) in nodes.iter().enumerate() {
            for e in [node - 1, node] {
                let (x0, x1) = (pos[e], pos[e + 1]);
                for (x, w) in gauss_legendre(ERROR_POINTS).mapped(x0, x1) {
                    let (psi, dpsi) = if e == node {
                        ((x1 - x) / (x1 - x0), -1.0 / (x1 - x0))
                    } else {
                        ((x - x0) / (x1 - x0), 1.0 / (x1 - x0))
                    };
                    let a = problem.op.density(
                        x,
                        t,
                        inactive,
                        sol.value(x, t, inactive),
                        sol.dx(x, t, inactive),
                        psi,
                        dpsi,
                    );
                    r[k] += w * (a - source.density(x, t, inactive) * psi);
                }
            }
        }
        // Gram matrix of the interior hats of the inactive block
        let lo = nodes.first().copied().unwrap_or(0).saturating_sub(1);
        let hi = nodes.last().copied().unwrap_or(0) + 1;
        let g = gram_matrix(&pos[lo..=hi], crate::calculus::Boundary::Dirichlet);
        out.push(g.inverse_form(&r)?.max(0.0).sqrt());
    }
    Ok(out)
}
