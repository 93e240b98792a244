//! Weighted time derivatives: the defining pairing, its material and
//! prior-work forms, mollification with the shifted kernel, the integration
//! by parts identity, graph norms and the trace embedding.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::coefficient::PiecewiseCoefficient;
use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, SpatialField, TimeBump};
use crate::linalg::Tridiagonal;
use crate::motion::{MotionMap, Side, INTERFACE_TOL};
use crate::operator::fitted_grid;
use crate::quadrature;

/// Boundary condition built into `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `V = H¹₀(0, 1)`.
    Dirichlet,
    /// `V = H¹(0, 1)`.
    Neumann,
}

/// Quadrature and norm settings shared by every space-time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormContext {
    /// Cell size of the reference mesh used for spatial quadrature and the
    /// discrete Riesz dual norm.
    pub h_ref: f64,
    /// Gauss points per spatial cell (per side of a cut cell).
    pub q_x: usize,
    /// Gauss points per time panel.
    pub q_t: usize,
    /// Time panels over `[0, T]`.
    pub time_panels: usize,
    pub boundary: Boundary,
    /// Bochner exponent `p ≥ 2`.
    pub p: f64,
}

impl Default for NormContext {
    fn default() -> Self {
        Self {
            h_ref: 1.0 / 512.0,
            q_x: 4,
            q_t: 8,
            time_panels: 32,
            boundary: Boundary::Dirichlet,
            p: 2.0,
        }
    }
}

impl NormContext {
    pub fn with_orders(q_x: usize, q_t: usize) -> Self {
        Self {
            q_x,
            q_t,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_x < 2 || self.q_t < 2 {
            return Err(Error::config(format!(
                "quadrature orders must be at least 2 (q_x = {}, q_t = {})",
                self.q_x, self.q_t
            )));
        }
        if !(self.h_ref > 0.0 && self.h_ref <= 0.5) {
            return Err(Error::config(format!("h_ref = {} must lie in (0, 1/2]", self.h_ref)));
        }
        if self.time_panels == 0 {
            return Err(Error::config("time_panels must be positive"));
        }
        if !(self.p >= 2.0) {
            return Err(Error::config(format!("exponent p = {} must be at least 2", self.p)));
        }
        Ok(())
    }

    pub fn reference_cells(&self) -> usize {
        (1.0 / self.h_ref).round().max(2.0) as usize
    }

    /// Side-tagged spatial nodes on `[0, 1]` cut at `gamma`.
    pub fn space_nodes(&self, gamma: f64, breaks: &[f64]) -> Vec<(f64, f64, Side)> {
        quadrature::split_nodes(0.0, 1.0, gamma, breaks, self.reference_cells(), self.q_x)
    }

    /// Time nodes on `[a, b]` with panels proportional to the length.
    pub fn time_nodes(&self, a: f64, b: f64, horizon: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        if b <= a {
            return Vec::new();
        }
        let panels = ((self.time_panels as f64 * (b - a) / horizon).ceil() as usize).max(1);
        quadrature::composite_nodes_with_breaks(a, b, breaks, panels, self.q_t)
    }
}

/// Side of `x` at time `t`, with points on the interface assigned to side 1.
pub fn side_at(motion: &MotionMap, x: f64, t: f64) -> Side {
    motion.side_of(x, t).unwrap_or(Side::One)
}

// ---------------------------------------------------------------------------
// mollification

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (t * t / (t * t - 1.0)).exp()
    }
}

/// Normalization `c = 1 / ∫₋₁¹ exp(t²/(t² - 1)) dt`, computed once.
pub fn mollifier_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / quadrature::adaptive(-1.0, 1.0, 1e-15, bump))
}

/// `ρ_ε(τ) = c ε⁻¹ exp(τ² / (τ² - ε²))` on `|τ| < ε`, zero elsewhere.
pub fn mollifier_kernel(eps: f64, tau: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("mollifier width {eps} must be positive")));
    }
    Ok(mollifier_constant() / eps * bump(tau / eps))
}

/// `ξ_ε(t) = ε (T - 2t) / T`.
pub fn kernel_shift(eps: f64, t: f64, horizon: f64) -> f64 {
    eps * (horizon - 2.0 * t) / horizon
}

const KERNEL_PANELS: usize = 16;
const KERNEL_POINTS: usize = 16;

/// Nodes `τ` and weights `c exp(τ²/(τ²-1)) dτ` on `[-1, 1]`, split at `cuts`.
fn kernel_rule(cuts: &[f64]) -> Vec<(f64, f64)> {
    let c = mollifier_constant();
    quadrature::composite_nodes_with_breaks(-1.0, 1.0, cuts, KERNEL_PANELS, KERNEL_POINTS)
        .into_iter()
        .map(|(tau, w)| (tau, w * c * bump(tau)))
        .collect()
}

fn check_width(eps: f64, horizon: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("mollifier width {eps} must be positive")));
    }
    if eps >= horizon / 4.0 {
        return Err(Error::domain(format!("mollifier width {eps} must be below T/4 = {}", horizon / 4.0)));
    }
    Ok(())
}

/// Kernel nodes `(s, weight, γ(s))` of the convolution at time `t`.
fn kernel_window(u: &dyn SpaceTimeField, motion: &MotionMap, eps: f64, t: f64) -> Vec<(f64, f64, f64)> {
    let horizon = motion.horizon();
    let center = t + kernel_shift(eps, t, horizon);
    // s = center - ε τ; a kink of u at s = k sits at τ = (center - k) / ε
    let cuts: Vec<f64> = u.time_breaks().iter().map(|k| (center - k) / eps).collect();
    kernel_rule(&cuts)
        .into_iter()
        .map(|(tau, w)| {
            let s = (center - eps * tau).clamp(0.0, horizon);
            (s, w, motion.gamma(s))
        })
        .collect()
}

/// Mollified value and slope `(u_ε, ∂ₓu_ε)` at `x` over a kernel window.
fn mollify_pair(u: &dyn SpaceTimeField, window: &[(f64, f64, f64)], x: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &(s, w, gamma) in window {
        let side = if x > gamma + INTERFACE_TOL { Side::Two } else { Side::One };
        value += w * u.value(x, s, side);
        slope += w * u.dx(x, s, side);
    }
    (value, slope)
}

/// `u_ε(x, t) = ∫ ρ_ε(t + ξ_ε(t) - s) u(x, s) ds`.
pub fn mollify(u: &dyn SpaceTimeField, motion: &MotionMap, eps: f64, x: f64, t: f64) -> Result<f64> {
    check_width(eps, motion.horizon())?;
    if !(0.0..=motion.horizon()).contains(&t) {
        return Err(Error::domain(format!("time {t} outside [0, {}]", motion.horizon())));
    }
    Ok(mollify_pair(u, &kernel_window(u, motion, eps, t), x).0)
}

/// `∫ ρ_ε` over its support by the same rule [`mollify`] uses.
pub fn kernel_mass(eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("mollifier width {eps} must be positive")));
    }
    // the substitution s = ε τ turns ∫ ρ_ε ds into ∫ c bump(τ) dτ
    Ok(kernel_rule(&[]).iter().map(|(_, w)| w).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub eps: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityStudy {
    pub rows: Vec<DensityRow>,
    /// Errors strictly decrease along the table.
    pub decreasing: bool,
    /// Least-squares slope of `log error` against `log ε`.
    pub order: f64,
}

/// `‖u_ε - u‖_{L²(J, V)}` for each width.
pub fn density_study(
    u: &dyn SpaceTimeField,
    motion: &MotionMap,
    eps_list: &[f64],
    ctx: &NormContext,
) -> Result<DensityStudy> {
    ctx.validate()?;
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("density study needs a strictly decreasing list of widths"));
    }
    let horizon = motion.horizon();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        check_width(eps, horizon)?;
        let scale = 1.0 - 2.0 * eps / horizon;
        // times where the kernel window edge meets a kink of u
        let mut breaks = u.time_breaks();
        for k in u.time_breaks() {
            breaks.push((k - 2.0 * eps) / scale);
            breaks.push(k / scale);
        }
        let times = ctx.time_nodes(0.0, horizon, horizon, &breaks);
        let total: f64 = times
            .par_iter()
            .map(|&(t, wt)| {
                let gamma = motion.gamma(t);
                let window = kernel_window(u, motion, eps, t);
                let local: f64 = ctx
                    .space_nodes(gamma, &u.space_breaks(t))
                    .into_iter()
                    .map(|(x, wx, side)| {
                        let (m, mx) = mollify_pair(u, &window, x);
                        let d = m - u.value(x, t, side);
                        let dx = mx - u.dx(x, t, side);
                        wx * (d * d + dx * dx)
                    })
                    .sum();
                wt * local
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        rows.push(DensityRow { eps, error: total.sqrt() });
    }
    let decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
    let order = fitted_order(
        &rows.iter().map(|r| r.eps).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    Ok(DensityStudy { rows, decreasing, order })
}

/// Least-squares slope of `log y` against `log h`.
pub fn fitted_order(h: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(y)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// pairings

/// Values of every quantity an integrand may need at one quadrature node.
#[derive(Debug, Clone, Copy)]
struct Point {
    alpha: f64,
    alpha_t: f64,
    alpha_x: f64,
    v: f64,
    v_x: f64,
    u: f64,
    u_t: f64,
    u_x: f64,
}

impl Point {
    fn at(coeff: &PiecewiseCoefficient, u: &dyn SpaceTimeField, x: f64, t: f64, side: Side) -> Self {
        let a = coeff.sample(x, t, side);
        let m = coeff.motion();
        Self {
            alpha: a.value,
            alpha_t: a.dt_value,
            alpha_x: a.dx_value,
            v: m.speed(x, t),
            v_x: m.speed_dx(x, t),
            u: u.value(x, t, side),
            u_t: u.dt(x, t, side),
            u_x: u.dx(x, t, side),
        }
    }
}

fn check_bump(phi: &TimeBump, horizon: f64) -> Result<()> {
    let (lo, hi) = phi.support();
    if lo < -1e-12 || hi > horizon + 1e-12 || phi.radius <= 0.0 {
        return Err(Error::domain(format!(
            "test bump support ({lo}, {hi}) must lie inside (0, {horizon})"
        )));
    }
    Ok(())
}

/// Panels and points of the time rule over a bump's support. The bump is
/// flat to all orders at its ends, which slows Gauss convergence.
const BUMP_PANELS: usize = 16;
const BUMP_POINTS: usize = 16;

fn bump_times(phi: &TimeBump, horizon: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let (lo, hi) = phi.support();
    quadrature::composite_nodes_with_breaks(lo.max(0.0), hi.min(horizon), breaks, BUMP_PANELS, BUMP_POINTS)
}

/// `∬ f` over `supp φ × (0, 1)` with the interface split at every time node,
/// for `N` integrands at once.
fn bump_integral<const N: usize, F>(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
    f: F,
) -> Result<[f64; N]>
where
    F: Fn(&Point, f64, f64, f64, f64) -> [f64; N] + Sync,
{
    ctx.validate()?;
    let motion = coeff.motion();
    check_bump(phi, motion.horizon())?;
    let times = bump_times(phi, motion.horizon(), &u.time_breaks());
    let w_breaks = w.breaks();
    let parts: Vec<[f64; N]> = times
        .par_iter()
        .map(|&(t, wt)| {
            let (ph, dph) = (phi.value(t), phi.dt(t));
            let mut breaks = w_breaks.clone();
            breaks.extend(u.space_breaks(t));
            let mut local = [0.0; N];
            for (x, wx, side) in ctx.space_nodes(motion.gamma(t), &breaks) {
                let vals = f(&Point::at(coeff, u, x, t, side), w.value(x), w.dx(x), ph, dph);
                for (acc, v) in local.iter_mut().zip(vals) {
                    *acc += wx * v;
                }
            }
            local.map(|v| wt * v)
        })
        .collect();
    let mut total = [0.0; N];
    for p in parts {
        for (acc, v) in total.iter_mut().zip(p) {
            *acc += v;
        }
    }
    Ok(total)
}

fn weighted_integrand(p: &Point, wv: f64, wx: f64, ph: f64, dph: f64) -> f64 {
    let transport =
        p.alpha_x * p.u * wv * p.v + p.alpha * p.u_x * wv * p.v + p.alpha * p.u * wx * p.v + p.alpha * p.u * wv * p.v_x;
    -(p.alpha * p.u * wv * dph + p.u * ph * wv * p.alpha_t + ph * transport)
}

fn material_integrand(p: &Point, wv: f64, wx: f64, ph: f64, dph: f64) -> f64 {
    let div_av = p.alpha_x * p.v + p.alpha * p.v_x;
    -(p.alpha * p.u * (wv * dph + ph * p.v * wx) + p.u * ph * wv * p.alpha_t + ph * p.u * wv * div_av)
}

fn classical_integrand(p: &Point, wv: f64, ph: f64) -> f64 {
    ph * p.alpha * p.u_t * wv
}

fn convective_integrand(p: &Point, wv: f64, ph: f64) -> f64 {
    ph * p.alpha * p.v * p.u_x * wv
}

/// `-∬ (α u w ∂ₜφ + u φ w ∂ₜα + φ ∂ₓ(α u w v))`, the defining pairing of the
/// weighted time derivative `α∂ₜu` against `φ w`.
pub fn weighted_pairing(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    Ok(bump_integral(u, phi, w, coeff, ctx, |p, wv, wx, ph, dph| [weighted_integrand(p, wv, wx, ph, dph)])?[0])
}

/// `-∬ (α u (w ∂ₜφ + φ v ∂ₓw) + u φ w ∂ₜα + φ u w ∂ₓ(α v))`, the pairing of
/// `α u̇` with the material derivative `u̇ = ∂ₜu + v ∂ₓu`.
pub fn material_pairing(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    Ok(bump_integral(u, phi, w, coeff, ctx, |p, wv, wx, ph, dph| [material_integrand(p, wv, wx, ph, dph)])?[0])
}

/// `∬ φ α ∂ₜu w` with the classical derivative.
pub fn classical_pairing(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    Ok(bump_integral(u, phi, w, coeff, ctx, |p, wv, _, ph, _| [classical_integrand(p, wv, ph)])?[0])
}

/// `∬ φ α v ∂ₓu w`, the gap between the material and weighted pairings.
pub fn convective_pairing(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    Ok(bump_integral(u, phi, w, coeff, ctx, |p, wv, _, ph, _| [convective_integrand(p, wv, ph)])?[0])
}

/// Step of the central difference in [`prior_work_pairing`].
/// The four bump pairings of one `(u, φ, w)` from a single pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingSet {
    pub weighted: f64,
    pub material: f64,
    pub classical: f64,
    pub convective: f64,
}

pub fn pairing_set(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<PairingSet> {
    let [weighted, material, classical, convective] = bump_integral(u, phi, w, coeff, ctx, |p, wv, wx, ph, dph| {
        [
            weighted_integrand(p, wv, wx, ph, dph),
            material_integrand(p, wv, wx, ph, dph),
            classical_integrand(p, wv, ph),
            convective_integrand(p, wv, ph),
        ]
    })?;
    Ok(PairingSet {
        weighted,
        material,
        classical,
        convective,
    })
}

pub const PRIOR_WORK_STEP: f64 = 1e-5;

/// `∫ φ(t) [d/dt (α(t) u(t), w) - ∫ α ∂ₓ(u w v) dx] dt` for piecewise-constant
/// `α`, with the time derivative taken by central differences.
pub fn prior_work_pairing(
    u: &dyn SpaceTimeField,
    phi: &TimeBump,
    w: &dyn SpatialField,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    ctx.validate()?;
    if !coeff.is_piecewise_constant() {
        return Err(Error::config("the prior-work pairing needs a piecewise-constant coefficient"));
    }
    let motion = coeff.motion();
    check_bump(phi, motion.horizon())?;
    let h = PRIOR_WORK_STEP;
    let mass = |t: f64| -> f64 {
        let mut breaks = w.breaks();
        breaks.extend(u.space_breaks(t));
        ctx.space_nodes(motion.gamma(t), &breaks)
            .into_iter()
            .map(|(x, wx, side)| wx * coeff.value(x, t, side) * u.value(x, t, side) * w.value(x))
            .sum()
    };
    let times: Vec<(f64, f64)> = bump_times(phi, motion.horizon(), &u.time_breaks())
        .into_iter()
        .filter(|&(t, _)| t >= h && t <= motion.horizon() - h)
        .collect();
    let parts: Vec<f64> = times
        .par_iter()
        .map(|&(t, wt)| {
            let ddt = (mass(t + h) - mass(t - h)) / (2.0 * h);
            let mut breaks = w.breaks();
            breaks.extend(u.space_breaks(t));
            let correction: f64 = ctx
                .space_nodes(motion.gamma(t), &breaks)
                .into_iter()
                .map(|(x, wx, side)| {
                    let (uv, ux) = (u.value(x, t, side), u.dx(x, t, side));
                    let (wv, wd) = (w.value(x), w.dx(x));
                    let (v, vx) = (motion.speed(x, t), motion.speed_dx(x, t));
                    wx * coeff.value(x, t, side) * (ux * wv * v + uv * wd * v + uv * wv * vx)
                })
                .sum();
            wt * phi.value(t) * (ddt - correction)
        })
        .collect();
    Ok(parts.into_iter().sum())
}

// ---------------------------------------------------------------------------
// integration by parts

/// `(√α u, √α z)` at time `t`.
pub fn weighted_inner(
    u: &dyn SpaceTimeField,
    z: &dyn SpaceTimeField,
    t: f64,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> f64 {
    let mut breaks = u.space_breaks(t);
    breaks.extend(z.space_breaks(t));
    ctx.space_nodes(coeff.motion().gamma(t), &breaks)
        .into_iter()
        .map(|(x, wx, side)| wx * coeff.value(x, t, side) * (u.value(x, t, side) * z.value(x, t, side)))
        .sum()
}

/// `|LHS − RHS|` of the integration by parts identity on `[t1, t2]`:
/// `∫ (α∂ₜu, z) + (α∂ₜz, u) = (αu, z)|_{t1}^{t2} − ∬ (u z ∂ₜα + ∂ₓ(α u z v))`.
/// The integrands are written symmetrically, so swapping `u` and `z` gives
/// the same bits.
pub fn ibp_residual(
    u: &dyn SpaceTimeField,
    z: &dyn SpaceTimeField,
    t1: f64,
    t2: f64,
    coeff: &PiecewiseCoefficient,
    ctx: &NormContext,
) -> Result<f64> {
    ctx.validate()?;
    let motion = coeff.motion();
    if !(t1 < t2) {
        return Err(Error::domain(format!("integration interval needs t1 < t2 (got {t1}, {t2})")));
    }
    if t1 < 0.0 || t2 > motion.horizon() {
        return Err(Error::domain(format!("[{t1}, {t2}] leaves [0, {}]", motion.horizon())));
    }
    let mut tb = u.time_breaks();
    tb.extend(z.time_breaks());
    let times = ctx.time_nodes(t1, t2, motion.horizon(), &tb);
    let parts: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&(t, wt)| {
            let mut breaks = u.space_breaks(t);
            breaks.extend(z.space_breaks(t));
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (x, wx, side) in ctx.space_nodes(motion.gamma(t), &breaks) {
                let a = coeff.sample(x, t, side);
                let (v, vx) = (motion.speed(x, t), motion.speed_dx(x, t));
                let (uv, ut, ux) = (u.value(x, t, side), u.dt(x, t, side), u.dx(x, t, side));
                let (zv, zt, zx) = (z.value(x, t, side), z.dt(x, t, side), z.dx(x, t, side));
                let uz = uv * zv;
                let flux = ux * zv + zx * uv;
                lhs += wx * a.value * (ut * zv + zt * uv);
                rhs += wx * (uz * a.dt_value + a.dx_value * uz * v + a.value * flux * v + a.value * uz * vx);
            }
            (wt * lhs, wt * rhs)
        })
        .collect();
    let lhs: f64 = parts.iter().map(|p| p.0).sum();
    let volume: f64 = parts.iter().map(|p| p.1).sum();
    let rhs = weighted_inner(u, z, t2, coeff, ctx) - weighted_inner(u, z, t1, coeff, ctx) - volume;
    Ok((lhs - rhs).abs())
}

// ---------------------------------------------------------------------------
// norms and the trace embedding

/// `C̃_emb,p = sqrt((C_v + 1 + 1/T) C_α C_emb² T^{(p−2)/p} + 1)`.
pub fn embedding_constant(p: f64, c_v: f64, c_alpha: f64, c_emb: f64, horizon: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::domain(format!("exponent p = {p} must be at least 2")));
    }
    if !(c_v >= 0.0 && c_alpha > 0.0 && c_emb > 0.0 && horizon > 0.0) {
        return Err(Error::domain("embedding constant needs positive constants"));
    }
    Ok(((c_v + 1.0 + 1.0 / horizon) * c_alpha * c_emb * c_emb * horizon.powf((p - 2.0) / p) + 1.0).sqrt())
}

/// `V`-Gram matrix of the hat functions on `nodes` restricted to the free
/// nodes of `boundary`.
pub fn gram_matrix(nodes: &[f64], boundary: Boundary) -> Tridiagonal {
    let n = nodes.len();
    let offset = if boundary == Boundary::Dirichlet { 1 } else { 0 };
    let dim = if boundary == Boundary::Dirichlet { n - 2 } else { n };
    let mut g = Tridiagonal::zeros(dim);
    for e in 0..n - 1 {
        let h = nodes[e + 1] - nodes[e];
        let local = [[h / 3.0 + 1.0 / h, h / 6.0 - 1.0 / h], [h / 6.0 - 1.0 / h, h / 3.0 + 1.0 / h]];
        for a in 0..2 {
            for b in a..2 {
                let (i, j) = (e + a, e + b);
                if i < offset || j < offset || i - offset >= dim || j - offset >= dim {
                    continue;
                }
                g.add(i - offset, j - offset, local[a][b]);
            }
        }
    }
    g
}

/// Discrete Riesz dual norm squared of the functional `ψ ↦ ∫ f ψ dx` on the
/// interface-fitted reference mesh at time `t`.
pub fn reference_dual_norm_sq<F>(gamma: f64, ctx: &NormContext, f: F) -> Result<f64>
where
    F: Fn(f64, Side) -> f64,
{
    let nodes = fitted_grid(ctx.reference_cells(), gamma);
    let g = gram_matrix(&nodes, ctx.boundary);
    let offset = if ctx.boundary == Boundary::Dirichlet { 1 } else { 0 };
    let mut load = vec![0.0; g.len()];
    let rule = quadrature::gauss_legendre(ctx.q_x);
    for e in 0..nodes.len() - 1 {
        let (x0, x1) = (nodes[e], nodes[e + 1]);
        let side = if 0.5 * (x0 + x1) < gamma { Side::One } else { Side::Two };
        for (x, w) in rule.mapped(x0, x1) {
            let fx = w * f(x, side);
            let s = (x - x0) / (x1 - x0);
            for (node, hat) in [(e, 1.0 - s), (e + 1, s)] {
                if node >= offset && node - offset < load.len() {
                    load[node - offset] += fx * hat;
                }
            }
        }
    }
    g.inverse_form(&load)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphNorm {
    /// `‖u‖_{L^p(J, V)}`.
    pub primal: f64,
    /// `‖α∂ₜu‖_{L^{p'}(J, V')}` in the discrete dual norm.
    pub dual: f64,
}

impl GraphNorm {
    pub fn total(&self) -> f64 {
        self.primal + self.dual
    }
}

/// Graph norm of `u` with `α∂ₜu` taken as the pointwise product.
pub fn graph_norm(u: &dyn SpaceTimeField, coeff: &PiecewiseCoefficient, ctx: &NormContext) -> Result<GraphNorm> {
    ctx.validate()?;
    let motion = coeff.motion();
    let horizon = motion.horizon();
    let p = ctx.p;
    let q = p / (p - 1.0);
    let times = ctx.time_nodes(0.0, horizon, horizon, &u.time_breaks());
    let parts: Result<Vec<(f64, f64)>> = times
        .par_iter()
        .map(|&(t, wt)| {
            let gamma = motion.gamma(t);
            let v_sq: f64 = ctx
                .space_nodes(gamma, &u.space_breaks(t))
                .into_iter()
                .map(|(x, wx, side)| wx * (u.value(x, t, side).powi(2) + u.dx(x, t, side).powi(2)))
                .sum();
            let dual_sq = reference_dual_norm_sq(gamma, ctx, |x, side| coeff.value(x, t, side) * u.dt(x, t, side))?;
            Ok((wt * v_sq.max(0.0).powf(p / 2.0), wt * dual_sq.max(0.0).powf(q / 2.0)))
        })
        .collect();
    let parts = parts?;
    Ok(GraphNorm {
        primal: parts.iter().map(|x| x.0).sum::<f64>().powf(1.0 / p),
        dual: parts.iter().map(|x| x.1).sum::<f64>().powf(1.0 / q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingReport {
    pub max_trace_norm: f64,
    pub graph_norm: f64,
    pub ratio: f64,
    pub bound: f64,
}

impl EmbeddingReport {
    pub fn holds(&self) -> bool {
        self.ratio <= self.bound
    }
}

/// Samples of `t ↦ ‖u(t)‖_{L²(Σ(t))}`.
pub const TRACE_SAMPLES: usize = 200;

/// `max_t ‖u(t)‖_{L²(Σ(t))}` against the graph norm, with the bound
/// `C̃_emb,p / √α₀`.
pub fn embedding_ratio(u: &dyn SpaceTimeField, coeff: &PiecewiseCoefficient, ctx: &NormContext) -> Result<EmbeddingReport> {
    let motion = coeff.motion();
    let horizon = motion.horizon();
    let max_trace_norm = (0..TRACE_SAMPLES)
        .into_par_iter()
        .map(|k| {
            let t = horizon * k as f64 / (TRACE_SAMPLES - 1) as f64;
            ctx.space_nodes(motion.gamma(t), &u.space_breaks(t))
                .into_iter()
                .filter(|&(_, _, side)| coeff.is_active(side))
                .map(|(x, wx, side)| wx * u.value(x, t, side).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);
    let graph = graph_norm(u, coeff, ctx)?.total();
    let g = coeff.global_constants()?;
    let bound = embedding_constant(ctx.p, g.c_v, g.c_alpha, 1.0, horizon)? / g.alpha0.sqrt();
    let ratio = if graph > 0.0 {
        max_trace_norm / graph
    } else if max_trace_norm > 0.0 {
        return Err(Error::Internal(format!(
            "graph norm vanishes while the trace norm is {max_trace_norm}"
        )));
    } else {
        0.0
    };
    Ok(EmbeddingReport {
        max_trace_norm,
        graph_norm: graph,
        ratio,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CatalogField, Polynomial, SineSeries};
    use std::f64::consts::PI;

    fn flow() -> MotionMap {
        MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap()
    }

    #[test]
    fn kernel_support_and_mass() {
        assert_eq!(mollifier_kernel(0.1, 0.1).unwrap(), 0.0);
        assert_eq!(mollifier_kernel(0.1, -0.1).unwrap(), 0.0);
        assert!(mollifier_kernel(0.0, 0.0).is_err());
        for eps in [0.1, 0.01] {
            assert!((kernel_mass(eps).unwrap() - 1.0).abs() < 1e-10);
        }
        // 1 / ∫₋₁¹ exp(t²/(t²-1)) dt, 30-digit mpmath value
        assert!((mollifier_constant() - 0.828_568_839_869_105_2).abs() < 1e-14);
    }

    #[test]
    fn shift_endpoints() {
        assert_eq!(kernel_shift(0.1, 0.0, 1.0), 0.1);
        assert_eq!(kernel_shift(0.1, 0.5, 1.0), 0.0);
        assert_eq!(kernel_shift(0.1, 1.0, 1.0), -0.1);
    }

    #[test]
    fn mollify_reference_cases() {
        let m = flow();
        let c = CatalogField::Constant { value: 2.5 };
        assert!((mollify(&c, &m, 0.05, 0.3, 0.0).unwrap() - 2.5).abs() < 1e-10);
        let lin = CatalogField::TimeLinear;
        assert!((mollify(&lin, &m, 0.05, 0.3, 0.5).unwrap() - 0.5).abs() < 1e-10);
        assert!(mollify(&lin, &m, 0.3, 0.3, 0.5).is_err());
    }

    #[test]
    fn density_needs_decreasing_widths() {
        let m = flow();
        let ctx = NormContext::default();
        assert!(density_study(&CatalogField::SinLinear, &m, &[0.05, 0.1], &ctx).is_err());
    }

    #[test]
    fn static_pairing_vanishes() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let coeff = PiecewiseCoefficient::constants(1.0, 2.0, id).unwrap();
        let u = CatalogField::SinMode { k: 1.0, amplitude: 1.0 };
        let phi = TimeBump::new(0.5, 0.3, 1.0);
        let w = SineSeries(vec![1.0, 0.5]);
        let v = weighted_pairing(&u, &phi, &w, &coeff, &NormContext::default()).unwrap();
        assert!(v.abs() < 1e-13, "{v}");
        let m = material_pairing(&u, &phi, &w, &coeff, &NormContext::default()).unwrap();
        assert!((m - v).abs() < 1e-15);
    }

    #[test]
    fn bump_must_vanish_at_ends() {
        let coeff = PiecewiseCoefficient::constants(1.0, 2.0, flow()).unwrap();
        let phi = TimeBump::new(0.1, 0.3, 1.0);
        let w = SineSeries(vec![1.0]);
        assert!(weighted_pairing(&CatalogField::SinLinear, &phi, &w, &coeff, &NormContext::default()).is_err());
    }

    #[test]
    fn constant_in_space_has_no_convective_gap() {
        let coeff = PiecewiseCoefficient::constants(1.0, 2.0, flow()).unwrap();
        let u = CatalogField::TimeSine;
        let phi = TimeBump::new(0.5, 0.4, 1.0);
        let w = Polynomial(vec![0.0, 1.0, -1.0]);
        let ctx = NormContext::default();
        let a = weighted_pairing(&u, &phi, &w, &coeff, &ctx).unwrap();
        let b = material_pairing(&u, &phi, &w, &coeff, &ctx).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ibp_static_case() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let coeff = PiecewiseCoefficient::constants(1.0, 2.0, id).unwrap();
        let u = CatalogField::SinMode { k: 1.0, amplitude: 1.0 };
        let r = ibp_residual(&u, &u, 0.0, 1.0, &coeff, &NormContext::with_orders(8, 8)).unwrap();
        assert!(r < 1e-12);
        assert!(ibp_residual(&u, &u, 0.5, 0.5, &coeff, &NormContext::default()).is_err());
    }

    #[test]
    fn embedding_constant_arithmetic() {
        assert_eq!(embedding_constant(2.0, 1.0, 2.0, 1.0, 1.0).unwrap(), 7f64.sqrt());
        assert_eq!(embedding_constant(2.0, 0.0, 1.0, 1.0, 1.0).unwrap(), 3f64.sqrt());
        // (1 + 1 + 1/4) · 2 · 4^{1/2} + 1 = 10
        assert!((embedding_constant(4.0, 1.0, 2.0, 1.0, 4.0).unwrap() - 10f64.sqrt()).abs() < 1e-15);
        assert!(embedding_constant(1.5, 1.0, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_field_has_zero_ratio() {
        let coeff = PiecewiseCoefficient::constants(1.0, 2.0, flow()).unwrap();
        let ctx = NormContext {
            h_ref: 1.0 / 64.0,
            ..NormContext::default()
        };
        let r = embedding_ratio(&CatalogField::Constant { value: 0.0 }, &coeff, &ctx).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(r.bound > 0.0);
    }

    #[test]
    fn dual_norm_of_riesz_image() {
        // the functional ψ ↦ (w, ψ)_V with w a hat function has dual norm ‖w‖_V
        let ctx = NormContext {
            h_ref: 0.25,
            boundary: Boundary::Neumann,
            ..NormContext::default()
        };
        let nodes = fitted_grid(4, 0.5);
        let g = gram_matrix(&nodes, Boundary::Neumann);
        let e = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let ge = g.mul(&e);
        assert!((g.inverse_form(&ge).unwrap() - crate::linalg::dot(&e, &ge)).abs() < 1e-14);
        // constant load 1 on Neumann: Riesz image is the constant 1, norm² = 1
        let d = reference_dual_norm_sq(0.5, &ctx, |_, _| 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-13);
    }

    proptest::proptest! {
        #[test]
        fn kernel_is_even_and_nonnegative(tau in -0.2f64..0.2, eps in 0.01f64..0.1) {
            let a = mollifier_kernel(eps, tau).unwrap();
            let b = mollifier_kernel(eps, -tau).unwrap();
            proptest::prop_assert_eq!(a, b);
            proptest::prop_assert!(a >= 0.0);
            proptest::prop_assert_eq!(a > 0.0, tau.abs() < eps);
        }
    }
}
