use rayon::prelude::*;
use sprs::CsMat;

use crate::calculus::gram_matrix;
use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, SpatialField};
use crate::linalg::{csr_from_triplets, Tridiagonal};
use crate::motion::Side;
use crate::operator::SpatialOperator;
use crate::quadrature::{gauss_legendre, split_nodes};

use super::mesh::SpaceTimeMesh;

/// The right-hand functional `g₁(t)`: `⟨g₁(t), ψ⟩ = ∫ f ψ dx + q₀ ψ(0) + q₁ ψ(1)`.
pub trait Source: Sync {
    fn density(&self, x: f64, t: f64, side: Side) -> f64;

    /// Point loads `(q₀, q₁)`; only seen by test functions that do not vanish
    /// on the boundary.
    fn boundary(&self, _t: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// Initial data `g₂` on `Σ₀`.
pub trait InitialData: Sync {
    fn value(&self, x: f64, side: Side) -> f64;
}

/// Zero source and zero initial data.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl Source for Zero {
    fn density(&self, _x: f64, _t: f64, _side: Side) -> f64 {
        0.0
    }
}

impl InitialData for Zero {
    fn value(&self, _x: f64, _side: Side) -> f64 {
        0.0
    }
}

/// A space-time field used as source density.
pub struct FieldSource<'a>(pub &'a dyn SpaceTimeField);

impl Source for FieldSource<'_> {
    fn density(&self, x: f64, t: f64, side: Side) -> f64 {
        self.0.value(x, t, side)
    }
}

/// The trace at `t = 0` of a space-time field.
pub struct Trace<'a>(pub &'a dyn SpaceTimeField);

impl InitialData for Trace<'_> {
    fn value(&self, x: f64, side: Side) -> f64 {
        self.0.value(x, 0.0, side)
    }
}

/// A spatial field as initial data.
pub struct Spatial<'a>(pub &'a dyn SpatialField);

impl InitialData for Spatial<'_> {
    fn value(&self, x: f64, _side: Side) -> f64 {
        self.0.value(x)
    }
}

/// Source scaled by `e^{rate · t}`.
pub struct Weighted<'a> {
    pub source: &'a dyn Source,
    pub rate: f64,
}

impl Source for Weighted<'_> {
    fn density(&self, x: f64, t: f64, side: Side) -> f64 {
        (self.rate * t).exp() * self.source.density(x, t, side)
    }

    fn boundary(&self, t: f64) -> (f64, f64) {
        let (q0, q1) = self.source.boundary(t);
        let e = (self.rate * t).exp();
        (e * q0, e * q1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss points per spatial sub-cell.
    pub q_x: usize,
    /// Gauss points per slab.
    pub q_t: usize,
    /// Trial functions carry the factor `e^{trial_rate · t}`.
    pub trial_rate: f64,
    /// Slab test functions carry the factor `e^{test_rate · t}`.
    pub test_rate: f64,
    pub parallel: bool,
    /// Build `M_X` and `M_Y`.
    pub norms: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            q_x: 4,
            q_t: 3,
            trial_rate: 0.0,
            test_rate: 0.0,
            parallel: true,
            norms: true,
        }
    }
}

/// Meaning of a test row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `(u(0), χ_j)_{Σ₀}`.
    Initial { dof: usize },
    /// `a(0; u(0), χ_j)` for `χ_j` supported in the inactive branch.
    Extension { dof: usize },
    /// `∫_{slab} ⟨α∂ₜu, ψ_j⟩ + a(t; u, ψ_j) dt`.
    Slab { slab: usize, dof: usize },
}

#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    pub mesh: SpaceTimeMesh,
    pub matrix: CsMat<f64>,
    pub rhs: Vec<f64>,
    /// `‖u‖²_{L²(J,V)} + ‖α∂ₜu‖²_{L²(J,V'),h}`.
    pub m_x: Option<CsMat<f64>>,
    /// Block diagonal Gram matrix of the test space.
    pub m_y: Option<CsMat<f64>>,
    pub rows: Vec<RowKind>,
    /// `‖g₁‖_{L²(J,V'),h}` from the per-slab Riesz solves.
    pub g1_dual: f64,
    /// `‖g₂‖_{L²(Σ₀)}`.
    pub g2_norm: f64,
    pub options: AssemblyOptions,
}

impl DiscreteSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn norm_matrices(&self) -> Result<(&CsMat<f64>, &CsMat<f64>)> {
        match (&self.m_x, &self.m_y) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::config("norm matrices were not assembled")),
        }
    }
}

/// Whether the moving hat of `dof` meets `Σ₀ = {α(·, 0) > 0}`.
pub fn meets_sigma0(mesh: &SpaceTimeMesh, op: &SpatialOperator, dof: usize) -> bool {
    let coeff = op.coefficient();
    let node = mesh.node(dof);
    let ig = mesh.interface_node();
    let left = node <= ig && coeff.is_active(Side::One);
    let right = node >= ig && coeff.is_active(Side::Two);
    left || right
}

/// Local shape data of one trial or test function at a quadrature point.
#[derive(Clone, Copy)]
struct Hat {
    dof: usize,
    value: f64,
    dx: f64,
    dt: f64,
}

/// Hats of cell `e` at `x`, with the Eulerian time derivative of the moving basis.
fn cell_hats(mesh: &SpaceTimeMesh, pos: &[f64], vel: &[f64], e: usize, x: f64) -> [Option<Hat>; 2] {
    let (x0, x1) = (pos[e], pos[e + 1]);
    let h = x1 - x0;
    let values = [(x1 - x) / h, (x - x0) / h];
    let slopes = [-1.0 / h, 1.0 / h];
    let speed = vel[e] * values[0] + vel[e + 1] * values[1];
    let mut out = [None, None];
    for a in 0..2 {
        if let Some(dof) = mesh.dof(e + a) {
            out[a] = Some(Hat {
                dof,
                value: values[a],
                dx: slopes[a],
                dt: -slopes[a] * speed,
            });
        }
    }
    out
}

struct SlabPart {
    b: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    m_x: Vec<(usize, usize, f64)>,
    m_y: Vec<(usize, usize, f64)>,
    g1_sq: f64,
}

struct Assembler<'a> {
    mesh: &'a SpaceTimeMesh,
    op: &'a SpatialOperator,
    source: &'a dyn Source,
    opts: AssemblyOptions,
    m: usize,
}

impl Assembler<'_> {
    fn boundary_loads(&self, t: f64, scale: f64, rhs: &mut [f64]) {
        let (q0, q1) = self.source.boundary(t);
        if let Some(d) = self.mesh.dof(0) {
            rhs[d] += scale * q0;
        }
        if let Some(d) = self.mesh.dof(self.mesh.n_x()) {
            rhs[d] += scale * q1;
        }
    }

    fn slab(&self, n: usize) -> Result<SlabPart> {
        let mesh = self.mesh;
        let op = self.op;
        let coeff = op.coefficient();
        let motion = mesh.motion();
        let m = self.m;
        let (t0, t1) = (mesh.times()[n], mesh.times()[n + 1]);
        let dt = t1 - t0;
        let row0 = m + n * m;
        let col0 = n * m;

        // b[j][level][i - j + 1]
        let mut b = vec![[[0.0f64; 3]; 2]; m];
        // mx[(level, i)][level'][i' - i + 1]
        let mut mx = vec![[[0.0f64; 3]; 2]; 2 * m];
        let mut my = Tridiagonal::zeros(m);
        let mut dual_blocks: Vec<f64> = if self.opts.norms { vec![0.0; 4 * m * m] } else { Vec::new() };
        let mut rhs = vec![0.0; m];
        let mut g1_sq = 0.0;

        for (tq, wq) in gauss_legendre(self.opts.q_t).mapped(t0, t1) {
            let (pos, vel) = mesh.nodes_at(n, tq);
            let gamma = motion.gamma(tq);
            let s = (tq - t0) / dt;
            let ell = [1.0 - s, s];
            let dell = [-1.0 / dt, 1.0 / dt];
            let e_trial = (self.opts.trial_rate * tq).exp();
            let e_test = (self.opts.test_rate * tq).exp();
            let kappa = self.opts.trial_rate;

            // D_q[j][(level, i)] and the plain load r_q[j]
            let mut d = vec![[[0.0f64; 3]; 2]; m];
            let mut r = vec![0.0; m];

            for e in 0..mesh.n_x() {
                let hats_at = |x: f64| cell_hats(mesh, &pos, &vel, e, x);
                for (x, wx, side) in split_nodes(pos[e], pos[e + 1], gamma, &[], 1, self.opts.q_x) {
                    let w = wq * wx;
                    let hats = hats_at(x);
                    let alpha = coeff.value(x, tq, side);
                    let f = self.source.density(x, tq, side);
                    for psi in hats.iter().flatten() {
                        let j = psi.dof;
                        r[j] += wx * f * psi.value;
                        for phi in hats.iter().flatten() {
                            let i = phi.dof;
                            let k = i + 1 - j;
                            for lvl in 0..2 {
                                let val = e_trial * ell[lvl] * phi.value;
                                let dxv = e_trial * ell[lvl] * phi.dx;
                                let dtv = e_trial * (kappa * ell[lvl] * phi.value + dell[lvl] * phi.value + ell[lvl] * phi.dt);
                                let form = op.density(x, tq, side, val, dxv, e_test * psi.value, e_test * psi.dx);
                                b[j][lvl][k] += w * (alpha * dtv * e_test * psi.value + form);
                                d[j][lvl][k] += wx * alpha * dtv * psi.value;
                            }
                        }
                    }
                    if self.opts.norms {
                        for p in hats.iter().flatten() {
                            for q in hats.iter().flatten() {
                                let k = q.dof + 1 - p.dof;
                                for la in 0..2 {
                                    for lb in 0..2 {
                                        let (ea, eb) = (e_trial * ell[la], e_trial * ell[lb]);
                                        mx[la * m + p.dof][lb][k] +=
                                            w * (ea * p.value * eb * q.value + ea * p.dx * eb * q.dx);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            self.boundary_loads(tq, 1.0, &mut r);
            for j in 0..m {
                rhs[j] += wq * e_test * r[j];
            }

            let g = gram_matrix(&pos, mesh.boundary());
            g1_sq += wq * g.inverse_form(&r)?;
            if self.opts.norms {
                let scale = wq * e_test * e_test;
                for j in 0..m {
                    my.diag[j] += scale * g.diag[j];
                    if j + 1 < m {
                        my.off[j] += scale * g.off[j];
                    }
                }
                // Σ_q w_q D_qᵀ G_q⁻¹ D_q
                let mut column = vec![0.0; m];
                for lvl in 0..2 {
                    for i in 0..m {
                        column.iter_mut().for_each(|c| *c = 0.0);
                        let mut any = false;
                        for j in i.saturating_sub(1)..(i + 2).min(m) {
                            let v = d[j][lvl][i + 1 - j];
                            column[j] = v;
                            any |= v != 0.0;
                        }
                        if !any {
                            continue;
                        }
                        let z = g.solve(&column)?;
                        let c2 = lvl * m + i;
                        for lvl1 in 0..2 {
                            for i1 in 0..m {
                                let mut acc = 0.0;
                                for j in i1.saturating_sub(1)..(i1 + 2).min(m) {
                                    acc += d[j][lvl1][i1 + 1 - j] * z[j];
                                }
                                dual_blocks[(lvl1 * m + i1) * 2 * m + c2] += wq * acc;
                            }
                        }
                    }
                }
            }
        }

        let mut bt = Vec::with_capacity(6 * m);
        for (j, row) in b.iter().enumerate() {
            for (lvl, band) in row.iter().enumerate() {
                for (k, &v) in band.iter().enumerate() {
                    if let Some(i) = (j + k).checked_sub(1).filter(|&i| i < m) {
                        bt.push((row0 + j, col0 + lvl * m + i, v));
                    }
                }
            }
        }

        let mut mxt = Vec::new();
        let mut myt = Vec::new();
        if self.opts.norms {
            for (a, row) in mx.iter().enumerate() {
                let (la, i) = (a / m, a % m);
                for (lb, band) in row.iter().enumerate() {
                    for (k, &v) in band.iter().enumerate() {
                        if let Some(i1) = (i + k).checked_sub(1).filter(|&i1| i1 < m) {
                            mxt.push((col0 + la * m + i, col0 + lb * m + i1, v));
                        }
                    }
                }
            }
            for a in 0..2 * m {
                for c in 0..2 * m {
                    let v = dual_blocks[a * 2 * m + c];
                    if v != 0.0 {
                        mxt.push((col0 + a, col0 + c, v));
                    }
                }
            }
            for j in 0..m {
                myt.push((row0 + j, row0 + j, my.diag[j]));
                if j + 1 < m {
                    myt.push((row0 + j, row0 + j + 1, my.off[j]));
                    myt.push((row0 + j + 1, row0 + j, my.off[j]));
                }
            }
        }
        Ok(SlabPart {
            b: bt,
            rhs,
            m_x: mxt,
            m_y: myt,
            g1_sq,
        })
    }
}

/// Assemble the space-time Petrov–Galerkin system.
///
/// Trial functions are `e^{κt} ℓ_m(t) N_i(x, t)` with hats on the moving
/// mesh and `ℓ_m` the nodal hats in time; slab test functions are
/// `e^{κ't} 1_{slab}(t) N_j(x, t)`. Level-0 rows impose the initial value on
/// `Σ₀` and, where `α(·, 0)` vanishes, the elliptic equation at `t = 0`.
pub fn assemble_system(
    mesh: &SpaceTimeMesh,
    op: &SpatialOperator,
    source: &dyn Source,
    initial: &dyn InitialData,
    opts: AssemblyOptions,
) -> Result<DiscreteSystem> {
    if opts.q_x < 1 || opts.q_t < 1 {
        return Err(Error::config("quadrature needs at least one point"));
    }
    if op.boundary() != mesh.boundary() {
        return Err(Error::config("operator and mesh disagree on the boundary condition"));
    }
    if op.coefficient().motion() != mesh.motion() {
        return Err(Error::config("coefficient and mesh use different motions"));
    }
    let m = mesh.dofs_per_level();
    let dim = mesh.trial_dim();
    let asm = Assembler {
        mesh,
        op,
        source,
        opts,
        m,
    };

    let slabs: Vec<SlabPart> = if opts.parallel {
        (0..mesh.n_t()).into_par_iter().map(|n| asm.slab(n)).collect::<Result<_>>()?
    } else {
        (0..mesh.n_t()).map(|n| asm.slab(n)).collect::<Result<_>>()?
    };

    let mut rows: Vec<RowKind> = (0..m)
        .map(|dof| {
            if meets_sigma0(mesh, op, dof) {
                RowKind::Initial { dof }
            } else {
                RowKind::Extension { dof }
            }
        })
        .collect();
    for n in 0..mesh.n_t() {
        rows.extend((0..m).map(|dof| RowKind::Slab { slab: n, dof }));
    }

    let (mut b, mut rhs, mut m_y, g2_norm) = initial_rows(mesh, op, source, initial, &rows[..m], opts)?;
    let mut m_x = Vec::new();
    rhs.resize(dim, 0.0);
    let mut g1_sq = 0.0;
    for (n, part) in slabs.into_iter().enumerate() {
        b.extend(part.b);
        m_x.extend(part.m_x);
        m_y.extend(part.m_y);
        rhs[m + n * m..m + (n + 1) * m].copy_from_slice(&part.rhs);
        g1_sq += part.g1_sq;
    }

    let matrix = csr_from_triplets(dim, dim, b);
    let (m_x, m_y) = if opts.norms {
        (Some(csr_from_triplets(dim, dim, m_x)), Some(csr_from_triplets(dim, dim, m_y)))
    } else {
        (None, None)
    };
    Ok(DiscreteSystem {
        mesh: mesh.clone(),
        matrix,
        rhs,
        m_x,
        m_y,
        rows,
        g1_dual: g1_sq.sqrt(),
        g2_norm,
        options: opts,
    })
}

type Triplets = Vec<(usize, usize, f64)>;

fn initial_rows(
    mesh: &SpaceTimeMesh,
    op: &SpatialOperator,
    source: &dyn Source,
    initial: &dyn InitialData,
    kinds: &[RowKind],
    opts: AssemblyOptions,
) -> Result<(Triplets, Vec<f64>, Triplets, f64)> {
    let m = mesh.dofs_per_level();
    let coeff = op.coefficient();
    let pos = mesh.level(0);
    let vel = vec![0.0; pos.len()];
    let gamma = mesh.motion().gamma0();
    let is_initial: Vec<bool> = kinds.iter().map(|k| matches!(k, RowKind::Initial { .. })).collect();

    let mut mass = vec![[0.0f64; 3]; m];
    let mut stiff = vec![[0.0f64; 3]; m];
    let mut rhs = vec![0.0; m];
    let mut load = vec![0.0; m];
    let mut g2_sq = 0.0;
    for e in 0..mesh.n_x() {
        for (x, w, side) in split_nodes(pos[e], pos[e + 1], gamma, &[], 1, opts.q_x) {
            let hats = cell_hats(mesh, pos, &vel, e, x);
            let in_sigma = coeff.is_active(side);
            let g2 = if in_sigma { initial.value(x, side) } else { 0.0 };
            g2_sq += w * g2 * g2;
            let f = source.density(x, 0.0, side);
            for psi in hats.iter().flatten() {
                let j = psi.dof;
                if in_sigma {
                    rhs[j] += w * g2 * psi.value;
                }
                load[j] += w * f * psi.value;
                for phi in hats.iter().flatten() {
                    let k = phi.dof + 1 - j;
                    if in_sigma {
                        mass[j][k] += w * phi.value * psi.value;
                    }
                    stiff[j][k] += w * op.density(x, 0.0, side, phi.value, phi.dx, psi.value, psi.dx);
                }
            }
        }
    }
    let (q0, q1) = source.boundary(0.0);
    if let Some(d) = mesh.dof(0) {
        load[d] += q0;
    }
    if let Some(d) = mesh.dof(mesh.n_x()) {
        load[d] += q1;
    }

    let gram = gram_matrix(pos, mesh.boundary());
    let mut b = Vec::new();
    let mut m_y = Vec::new();
    for j in 0..m {
        let band = if is_initial[j] { &mass[j] } else { &stiff[j] };
        if !is_initial[j] {
            rhs[j] = load[j];
        }
        for (k, &v) in band.iter().enumerate() {
            if let Some(i) = (j + k).checked_sub(1).filter(|&i| i < m) {
                b.push((j, i, v));
            }
        }
        if opts.norms {
            for (k, &v) in mass[j].iter().enumerate() {
                let Some(i) = (j + k).checked_sub(1).filter(|&i| i < m) else { continue };
                if is_initial[j] && is_initial[i] {
                    m_y.push((j, i, v));
                }
            }
            for i in j.saturating_sub(1)..(j + 2).min(m) {
                if !is_initial[j] && !is_initial[i] {
                    let v = if i == j { gram.diag[j] } else { gram.off[i.min(j)] };
                    m_y.push((j, i, v));
                }
            }
        }
    }
    Ok((b, rhs, m_y, g2_sq.sqrt()))
}

/// Trial coefficients of the nodal interpolant of `u` (divided by the trial
/// weight `e^{κ t_n}`).
pub fn interpolate(mesh: &SpaceTimeMesh, u: &dyn SpaceTimeField, trial_rate: f64) -> Vec<f64> {
    let m = mesh.dofs_per_level();
    let mut out = vec![0.0; mesh.trial_dim()];
    for (n, &t) in mesh.times().iter().enumerate() {
        let scale = (-trial_rate * t).exp();
        for dof in 0..m {
            let node = mesh.node(dof);
            let x = mesh.level(n)[node];
            let side = if node <= mesh.interface_node() { Side::One } else { Side::Two };
            out[mesh.trial_index(n, dof)] = scale * u.value(x, t, side);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Boundary;
    use crate::coefficient::PiecewiseCoefficient;
    use crate::field::CatalogField;
    use crate::linalg::{asymmetry, mul_vec, quadratic_form, to_dense};
    use crate::motion::MotionMap;
    use std::f64::consts::PI;

    fn heat(n_x: usize, n_t: usize, horizon: f64) -> (SpaceTimeMesh, SpatialOperator) {
        let id = MotionMap::identity(0.5, horizon).unwrap();
        let op = SpatialOperator::laplacian(PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap(), Boundary::Dirichlet)
            .unwrap();
        (SpaceTimeMesh::build(n_x, n_t, &id, Boundary::Dirichlet).unwrap(), op)
    }

    fn jump(n_x: usize, n_t: usize, alpha2: f64) -> (SpaceTimeMesh, SpatialOperator) {
        let flow = MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap();
        let op =
            SpatialOperator::laplacian(PiecewiseCoefficient::constants(1.0, alpha2, flow).unwrap(), Boundary::Dirichlet)
                .unwrap();
        (SpaceTimeMesh::build(n_x, n_t, &flow, Boundary::Dirichlet).unwrap(), op)
    }

    #[test]
    fn one_node_one_slab_block() {
        let (mesh, op) = heat(2, 1, 1.0);
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        let b = to_dense(&sys.matrix);
        // h = 1/2: mass 2h/3, stiffness 2/h, Δt = 1
        let expected = [[1.0 / 3.0, 0.0], [-1.0 / 3.0 + 2.0, 1.0 / 3.0 + 2.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((b[(r, c)] - expected[r][c]).abs() < 1e-14, "{b}");
            }
        }
    }

    #[test]
    fn heat_matches_classical_scheme() {
        let id = MotionMap::identity(1.0 / 3.0, 1.0).unwrap();
        let op = SpatialOperator::laplacian(PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap(), Boundary::Dirichlet)
            .unwrap();
        let mesh = SpaceTimeMesh::build(3, 2, &id, Boundary::Dirichlet).unwrap();
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        let b = to_dense(&sys.matrix);
        let h = 1.0 / 3.0;
        let dt = 0.5;
        // interior dofs 0, 1 at nodes 1/3 and 2/3
        let mass = [[2.0 * h / 3.0, h / 6.0], [h / 6.0, 2.0 * h / 3.0]];
        let stiff = [[2.0 / h, -1.0 / h], [-1.0 / h, 2.0 / h]];
        let mut oracle = nalgebra::DMatrix::<f64>::zeros(6, 6);
        for j in 0..2 {
            for i in 0..2 {
                oracle[(j, i)] = mass[j][i];
                for n in 0..2 {
                    let row = 2 + 2 * n + j;
                    oracle[(row, 2 * n + i)] = -mass[j][i] + 0.5 * dt * stiff[j][i];
                    oracle[(row, 2 * (n + 1) + i)] = mass[j][i] + 0.5 * dt * stiff[j][i];
                }
            }
        }
        assert!((&b - &oracle).amax() <= 1e-12, "{b}\n{oracle}");
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let (mesh, op) = jump(6, 3, 2.0);
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        assert!(sys.rhs.iter().all(|&v| v == 0.0));
        assert_eq!(sys.g1_dual, 0.0);
        assert_eq!(sys.g2_norm, 0.0);
    }

    #[test]
    fn system_is_square() {
        for (n_x, n_t) in [(2, 1), (3, 5), (8, 2), (7, 7)] {
            for a2 in [2.0, 0.0] {
                let (mesh, op) = jump(n_x, n_t, a2);
                let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
                assert_eq!(sys.matrix.rows(), sys.matrix.cols());
                assert_eq!(sys.rows.len(), (n_t + 1) * (n_x - 1));
            }
        }
    }

    #[test]
    fn gram_matrices_are_symmetric_positive_definite() {
        for a2 in [2.0, 0.0] {
            let (mesh, op) = jump(8, 4, a2);
            let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
            let (mx, my) = sys.norm_matrices().unwrap();
            for g in [mx, my] {
                assert!(asymmetry(g) <= 1e-13);
                assert!(to_dense(g).cholesky().is_some());
            }
        }
    }

    #[test]
    fn degenerate_rows_split_at_the_interface() {
        let (mesh, op) = jump(8, 2, 0.0);
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        // nodes 1..=4 meet [0, ½]; nodes 5..=7 lie inside the inactive branch
        let kinds: Vec<_> = sys.rows[..7].iter().map(|r| matches!(r, RowKind::Initial { .. })).collect();
        assert_eq!(kinds, [true, true, true, true, false, false, false]);
    }

    #[test]
    fn parallel_assembly_is_bitwise_serial() {
        let (mesh, op) = jump(12, 6, 2.0);
        let u = CatalogField::SinLinear;
        let src = FieldSource(&u);
        let par = assemble_system(&mesh, &op, &src, &Trace(&u), AssemblyOptions::default()).unwrap();
        let ser = assemble_system(
            &mesh,
            &op,
            &src,
            &Trace(&u),
            AssemblyOptions {
                parallel: false,
                ..AssemblyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(par.matrix, ser.matrix);
        assert_eq!(par.m_x, ser.m_x);
        assert_eq!(par.m_y, ser.m_y);
        assert_eq!(par.rhs.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), ser.rhs.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(par.g1_dual.to_bits(), ser.g1_dual.to_bits());
    }

    #[test]
    fn single_basis_function_y_norm() {
        let (mesh, op) = heat(4, 2, 1.0);
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        let (_, my) = sys.norm_matrices().unwrap();
        // slab-0 test function of the middle node: Δt (‖N‖² + ‖N'‖²) = ½ (2h/3 + 2/h)
        let mut e = vec![0.0; sys.dim()];
        e[3 + 1] = 1.0;
        let h = 0.25;
        assert!((quadratic_form(my, &e) - 0.5 * (2.0 * h / 3.0 + 2.0 / h)).abs() < 1e-13);
        assert_eq!(quadratic_form(my, &vec![0.0; sys.dim()]), 0.0);
    }

    #[test]
    fn degenerate_dual_part_vanishes_in_inactive_branch() {
        let (mesh, op) = jump(8, 2, 0.0);
        let sys = assemble_system(&mesh, &op, &Zero, &Zero, AssemblyOptions::default()).unwrap();
        let (mx, _) = sys.norm_matrices().unwrap();
        // u = N₆(x, t) for all t: a moving hat deep inside branch 2
        let m = mesh.dofs_per_level();
        let mut e = vec![0.0; sys.dim()];
        for n in 0..3 {
            e[n * m + 5] = 1.0;
        }
        let total = quadratic_form(mx, &e);
        let mut l2v = 0.0;
        for n in 0..2 {
            for (tq, wq) in gauss_legendre(3).mapped(mesh.times()[n], mesh.times()[n + 1]) {
                let (pos, _) = mesh.nodes_at(n, tq);
                let (a, c, b) = (pos[5], pos[6], pos[7]);
                l2v += wq * ((c - a) / 3.0 + (b - c) / 3.0 + 1.0 / (c - a) + 1.0 / (b - c));
            }
        }
        assert!((total - l2v).abs() < 1e-12 * l2v, "{total} vs {l2v}");
    }

    #[test]
    fn discrete_consistency_of_smooth_interpolant() {
        // B_h I_h u - f_h, tested against the all-ones slab functions, decays with h² + Δt²
        let u = CatalogField::SinLinear;
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let flow = MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap();
            let op = SpatialOperator::laplacian(PiecewiseCoefficient::constants(1.0, 1.0, flow).unwrap(), Boundary::Dirichlet)
                .unwrap();
            let mesh = SpaceTimeMesh::build(n, n, &flow, Boundary::Dirichlet).unwrap();
            struct Heat;
            impl Source for Heat {
                fn density(&self, x: f64, _t: f64, _side: Side) -> f64 {
                    let s = (PI * x).sin();
                    s + PI * PI * s * (1.0 + _t)
                }
            }
            let sys = assemble_system(&mesh, &op, &Heat, &Trace(&u), AssemblyOptions::default()).unwrap();
            let c = interpolate(&mesh, &u, 0.0);
            let r: Vec<f64> = mul_vec(&sys.matrix, &c).iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
            let m = mesh.dofs_per_level();
            let slab_sum: f64 = r[m..].iter().sum::<f64>().abs();
            errs.push(slab_sum);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 1.5, "{errs:?}");
    }
}
