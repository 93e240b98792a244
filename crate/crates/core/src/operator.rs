//! The spatial operator family `A(t)` as the bilinear form
//! `a(t; w, ψ) = ∫ k ∂ₓw ∂ₓψ + b ∂ₓw ψ + c w ψ dx`, with certified constants.

use std::f64::consts::PI;

use crate::calculus::NormContext;
use crate::coefficient::PiecewiseCoefficient;
use crate::error::{Error, Result};
use crate::field::SpatialField;
use crate::motion::Side;

pub use crate::calculus::Boundary;

/// Tolerance for boundary values of members of `H¹₀`.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// Operator coefficients `k`, `b`, `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarField {
    Constant { value: f64 },
    /// `left` on side 1, `right` on side 2.
    PerBranch { left: f64, right: f64 },
    /// `value + slope_x · x + slope_t · t`.
    Affine { value: f64, slope_x: f64, slope_t: f64 },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    pub fn value(&self, x: f64, t: f64, side: Side) -> f64 {
        match *self {
            ScalarField::Constant { value } => value,
            ScalarField::PerBranch { left, right } => {
                if side == Side::One {
                    left
                } else {
                    right
                }
            }
            ScalarField::Affine { value, slope_x, slope_t } => value + slope_x * x + slope_t * t,
        }
    }

    pub fn dx(&self, _x: f64, _t: f64, _side: Side) -> f64 {
        match *self {
            ScalarField::Affine { slope_x, .. } => slope_x,
            _ => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            ScalarField::Constant { value } => value == 0.0,
            ScalarField::PerBranch { left, right } => left == 0.0 && right == 0.0,
            ScalarField::Affine { value, slope_x, slope_t } => value == 0.0 && slope_x == 0.0 && slope_t == 0.0,
        }
    }

    /// Extremes over `[0, 1] × [0, T]` (exact: the field is affine per branch).
    fn range(&self, horizon: f64) -> (f64, f64) {
        let corners: Vec<f64> = match *self {
            ScalarField::Constant { value } => vec![value],
            ScalarField::PerBranch { left, right } => vec![left, right],
            ScalarField::Affine { value, slope_x, slope_t } => [0.0, 1.0]
                .iter()
                .flat_map(|&x| [0.0, horizon].map(move |t| value + slope_x * x + slope_t * t))
                .collect(),
        };
        corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// `(c_A, C_A, λ₀)` together with the derived `λ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConstants {
    pub c_a: f64,
    pub big_c_a: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

/// `c_A` and `C_A` supplied by the user instead of certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredConstants {
    pub c_a: f64,
    pub big_c_a: f64,
    pub lambda0: Option<f64>,
}

/// `C_α² C_emb² (C_v + 1)² / (2 c_A α₀)`.
pub fn lambda1(c_alpha: f64, c_emb: f64, c_v: f64, c_a: f64, alpha0: f64) -> Result<f64> {
    if !(c_alpha > 0.0 && c_emb > 0.0 && c_a > 0.0 && alpha0 > 0.0 && c_v >= 0.0) {
        return Err(Error::config(format!(
            "lambda1 needs positive constants (C_alpha = {c_alpha}, C_emb = {c_emb}, C_v = {c_v}, c_A = {c_a}, alpha0 = {alpha0})"
        )));
    }
    Ok(c_alpha * c_alpha * c_emb * c_emb * (c_v + 1.0).powi(2) / (2.0 * c_a * alpha0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialOperator {
    diffusion: ScalarField,
    advection: ScalarField,
    reaction: ScalarField,
    /// Multiple of `α` added to the reaction (nonzero after a shift).
    alpha_shift: f64,
    coefficient: PiecewiseCoefficient,
    boundary: Boundary,
    constants: OperatorConstants,
}

impl SpatialOperator {
    /// Operator with certified constants; `λ₀` defaults to `λ₁`.
    pub fn new(
        diffusion: ScalarField,
        advection: ScalarField,
        reaction: ScalarField,
        coefficient: PiecewiseCoefficient,
        boundary: Boundary,
    ) -> Result<Self> {
        Self::build(diffusion, advection, reaction, coefficient, boundary, None)
    }

    /// Operator with user-declared constants, validated by sampling.
    pub fn with_declared(
        diffusion: ScalarField,
        advection: ScalarField,
        reaction: ScalarField,
        coefficient: PiecewiseCoefficient,
        boundary: Boundary,
        declared: DeclaredConstants,
    ) -> Result<Self> {
        Self::build(diffusion, advection, reaction, coefficient, boundary, Some(declared))
    }

    /// `-∂ₓ(k ∂ₓ ·)` with `k = 1`.
    pub fn laplacian(coefficient: PiecewiseCoefficient, boundary: Boundary) -> Result<Self> {
        Self::new(
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            coefficient,
            boundary,
        )
    }

    fn build(
        diffusion: ScalarField,
        advection: ScalarField,
        reaction: ScalarField,
        coefficient: PiecewiseCoefficient,
        boundary: Boundary,
        declared: Option<DeclaredConstants>,
    ) -> Result<Self> {
        let horizon = coefficient.motion().horizon();
        let (k_min, k_max) = diffusion.range(horizon);
        if !(k_min > 0.0) {
            return Err(Error::config(format!("diffusion must be positive (minimum {k_min})")));
        }
        let (b_min, b_max) = advection.range(horizon);
        let (c_min, c_max) = reaction.range(horizon);
        let g = coefficient.global_constants()?;
        let big_c_a_certified = k_max + b_min.abs().max(b_max.abs()) + c_min.abs().max(c_max.abs());

        let mut op = Self {
            diffusion,
            advection,
            reaction,
            alpha_shift: 0.0,
            coefficient,
            boundary,
            constants: OperatorConstants {
                c_a: 0.0,
                big_c_a: big_c_a_certified,
                lambda0: 0.0,
                lambda1: 0.0,
            },
        };

        match declared {
            Some(d) => {
                if !(d.c_a > 0.0 && d.c_a <= d.big_c_a) {
                    return Err(Error::config(format!(
                        "declared constants need 0 < c_A <= C_A (got c_A = {}, C_A = {})",
                        d.c_a, d.big_c_a
                    )));
                }
                let l1 = lambda1(g.c_alpha, 1.0, g.c_v, d.c_a, g.alpha0)?;
                op.constants = OperatorConstants {
                    c_a: d.c_a,
                    big_c_a: d.big_c_a,
                    lambda0: d.lambda0.unwrap_or(l1),
                    lambda1: l1,
                };
                op.validate_declared()?;
            }
            None => {
                let (c_a, extra) = op.certify_coercivity(k_min, c_min)?;
                let l1 = lambda1(g.c_alpha, 1.0, g.c_v, c_a, g.alpha0)?;
                op.constants = OperatorConstants {
                    c_a,
                    big_c_a: big_c_a_certified.max(c_a),
                    lambda0: l1 + extra,
                    lambda1: l1,
                };
            }
        }
        Ok(op)
    }

    /// `(c_A, λ₀ − λ₁)` from the coefficient extremes and the Poincaré
    /// inequality `‖∂ₓw‖² ≥ π² ‖w‖²` on `H¹₀(0, 1)`.
    fn certify_coercivity(&self, k_min: f64, c_min: f64) -> Result<(f64, f64)> {
        let advection_constant = matches!(self.advection, ScalarField::Constant { .. });
        let slope_b = match self.advection {
            ScalarField::Affine { slope_x, .. } => slope_x,
            _ => 0.0,
        };
        match self.boundary {
            Boundary::Dirichlet => {
                if !(advection_constant || matches!(self.advection, ScalarField::Affine { .. })) {
                    return Err(Error::config(
                        "coercivity cannot be certified for branch-wise advection; declare c_A and C_A",
                    ));
                }
                // ∫ b w' w = -½ ∫ ∂ₓb w² for w ∈ H¹₀
                let c_eff = c_min - 0.5 * slope_b;
                let p = PI * PI;
                let c_a = if c_eff >= k_min { k_min } else { (k_min * p + c_eff) / (p + 1.0) };
                if !(c_a > 0.0) {
                    return Err(Error::config(format!(
                        "operator is not coercive on H¹₀ (certified c_A = {c_a}); declare constants"
                    )));
                }
                Ok((c_a, 0.0))
            }
            Boundary::Neumann => {
                if !self.advection.is_zero() {
                    return Err(Error::config(
                        "coercivity cannot be certified for advection on H¹; declare c_A and C_A",
                    ));
                }
                if c_min > 0.0 {
                    return Ok((k_min.min(c_min), 0.0));
                }
                if self.coefficient.is_degenerate() {
                    return Err(Error::config(
                        "operator without reaction is not coercive on H¹ with a degenerate coefficient",
                    ));
                }
                // lift the reaction through the (λ₀ − λ₁) α term up to k_min
                let extra = (k_min - c_min) / self.coefficient.alpha0();
                Ok((k_min, extra))
            }
        }
    }

    /// Rejects declared constants that fail boundedness or coercivity on a
    /// sampled discrete space.
    fn validate_declared(&self) -> Result<()> {
        use nalgebra::DMatrix;
        let n = 64;
        let horizon = self.coefficient.motion().horizon();
        for step in 0..10 {
            let t = horizon * step as f64 / 9.0;
            let mats = self.sampled_matrices(t, n);
            let (a, m_alpha, g) = (&mats.0, &mats.1, &mats.2);
            let shift = self.constants.lambda0 - self.constants.lambda1;
            let sym = (a + a.transpose()) * 0.5 + m_alpha * shift;
            let low = crate::linalg::generalized_symmetric_min(&sym, g)?;
            if low < self.constants.c_a * (1.0 - 1e-8) {
                return Err(Error::config(format!(
                    "declared c_A = {} violates coercivity at t = {t} (sampled minimum {low})",
                    self.constants.c_a
                )));
            }
            // |a(w, ψ)| / (‖w‖ ‖ψ‖) is bounded by the largest singular value of L⁻¹ A L⁻ᵀ
            let l = g
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Internal("V-Gram matrix is not positive definite".into()))?
                .l();
            let li: DMatrix<f64> = l.try_inverse().ok_or_else(|| Error::Internal("singular Cholesky factor".into()))?;
            let top = (&li * a * li.transpose()).singular_values().max();
            if top > self.constants.big_c_a * (1.0 + 1e-8) {
                return Err(Error::config(format!(
                    "declared C_A = {} violates boundedness at t = {t} (sampled {top})",
                    self.constants.big_c_a
                )));
            }
        }
        Ok(())
    }

    /// Dense stiffness, `α`-mass and `V`-Gram matrices on a uniform
    /// interface-fitted grid of `n` cells at time `t`.
    fn sampled_matrices(&self, t: f64, n: usize) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
        use nalgebra::DMatrix;
        let gamma = self.coefficient.motion().gamma(t);
        let nodes = fitted_grid(n, gamma);
        let free: Vec<usize> = match self.boundary {
            Boundary::Dirichlet => (1..nodes.len() - 1).collect(),
            Boundary::Neumann => (0..nodes.len()).collect(),
        };
        let dim = free.len();
        let index = |node: usize| free.iter().position(|&f| f == node);
        let mut a = DMatrix::zeros(dim, dim);
        let mut m = DMatrix::zeros(dim, dim);
        let mut g = DMatrix::zeros(dim, dim);
        let rule = crate::quadrature::gauss_legendre(4);
        for e in 0..nodes.len() - 1 {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            let side = if 0.5 * (x0 + x1) < gamma { Side::One } else { Side::Two };
            let len = x1 - x0;
            for (x, w) in rule.mapped(x0, x1) {
                let vals = [(x1 - x) / len, (x - x0) / len];
                let ders = [-1.0 / len, 1.0 / len];
                let alpha = self.coefficient.value(x, t, side);
                for p in 0..2 {
                    let Some(ip) = index(e + p) else { continue };
                    for q in 0..2 {
                        let Some(iq) = index(e + q) else { continue };
                        // row = test function ψ_p, column = trial w_q
                        a[(ip, iq)] += w * self.density(x, t, side, vals[q], ders[q], vals[p], ders[p]);
                        m[(ip, iq)] += w * alpha * vals[p] * vals[q];
                        g[(ip, iq)] += w * (vals[p] * vals[q] + ders[p] * ders[q]);
                    }
                }
            }
        }
        (a, m, g)
    }

    pub fn constants(&self) -> OperatorConstants {
        self.constants
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn coefficient(&self) -> &PiecewiseCoefficient {
        &self.coefficient
    }

    pub fn diffusion(&self) -> &ScalarField {
        &self.diffusion
    }

    pub fn advection(&self) -> &ScalarField {
        &self.advection
    }

    pub fn reaction(&self) -> &ScalarField {
        &self.reaction
    }

    pub fn alpha_shift(&self) -> f64 {
        self.alpha_shift
    }

    /// `c + shift · α` at a point.
    pub fn effective_reaction(&self, x: f64, t: f64, side: Side) -> f64 {
        let c = self.reaction.value(x, t, side);
        if self.alpha_shift == 0.0 {
            c
        } else {
            c + self.alpha_shift * self.coefficient.value(x, t, side)
        }
    }

    /// Integrand of `a(t; w, ψ)` from point values and slopes.
    #[allow(clippy::too_many_arguments)]
    #[inline]
    pub fn density(&self, x: f64, t: f64, side: Side, w: f64, dw: f64, psi: f64, dpsi: f64) -> f64 {
        let k = self.diffusion.value(x, t, side);
        let b = self.advection.value(x, t, side);
        k * dw * dpsi + b * dw * psi + self.effective_reaction(x, t, side) * w * psi
    }

    fn check_boundary(&self, f: &dyn SpatialField, name: &str) -> Result<()> {
        if self.boundary == Boundary::Dirichlet {
            let (l, r) = (f.value(0.0), f.value(1.0));
            if l.abs() > BOUNDARY_TOL || r.abs() > BOUNDARY_TOL {
                return Err(Error::domain(format!(
                    "{name} violates the Dirichlet condition (values {l:e}, {r:e} at the endpoints)"
                )));
            }
        }
        Ok(())
    }

    /// `a(t; w, ψ)`, interface-fitted.
    pub fn apply_form(&self, t: f64, w: &dyn SpatialField, psi: &dyn SpatialField, ctx: &NormContext) -> Result<f64> {
        self.check_boundary(w, "w")?;
        self.check_boundary(psi, "psi")?;
        let gamma = self.coefficient.motion().gamma(t);
        let mut breaks = w.breaks();
        breaks.extend(psi.breaks());
        Ok(ctx
            .space_nodes(gamma, &breaks)
            .into_iter()
            .map(|(x, wt, side)| wt * self.density(x, t, side, w.value(x), w.dx(x), psi.value(x), psi.dx(x)))
            .sum())
    }

    /// `a(t; w, w) + (λ₀ − λ₁) ‖√α w‖² − c_A ‖w‖²_V`.
    pub fn coercivity_margin(&self, t: f64, w: &dyn SpatialField, ctx: &NormContext) -> Result<f64> {
        self.check_boundary(w, "w")?;
        let gamma = self.coefficient.motion().gamma(t);
        let nodes = ctx.space_nodes(gamma, &w.breaks());
        let norm_v: f64 = nodes.iter().map(|&(x, wt, _)| wt * (w.value(x).powi(2) + w.dx(x).powi(2))).sum();
        if norm_v == 0.0 {
            return Err(Error::domain("coercivity margin of the zero field"));
        }
        let a = self.apply_form(t, w, w, ctx)?;
        let alpha: f64 = nodes
            .iter()
            .map(|&(x, wt, side)| wt * self.coefficient.value(x, t, side) * w.value(x).powi(2))
            .sum();
        let c = self.constants;
        Ok(a + (c.lambda0 - c.lambda1) * alpha - c.c_a * norm_v)
    }

    /// `Â = A + λ₀ α` with constants `(c_A, C_A + |λ₀| C_α C_emb², 0)`.
    pub fn shifted(&self) -> Result<SpatialOperator> {
        let l0 = self.constants.lambda0;
        if l0 == 0.0 {
            return Ok(self.clone());
        }
        let g = self.coefficient.global_constants()?;
        let mut out = self.clone();
        out.alpha_shift += l0;
        out.constants.big_c_a += l0.abs() * g.c_alpha;
        out.constants.lambda0 = 0.0;
        Ok(out)
    }

    /// Shift by an arbitrary `λ`, keeping the remaining `λ₀ − λ`.
    pub fn shifted_by(&self, lambda: f64) -> Result<SpatialOperator> {
        let mut tmp = self.clone();
        tmp.constants.lambda0 = lambda;
        let mut out = tmp.shifted()?;
        out.constants.lambda0 = self.constants.lambda0 - lambda;
        Ok(out)
    }
}

/// `n` uniform-ish cells on `[0, 1]` with `gamma` as a node.
pub fn fitted_grid(n: usize, gamma: f64) -> Vec<f64> {
    let left = ((n as f64 * gamma).round() as usize).clamp(1, n - 1);
    let right = n - left;
    let mut nodes: Vec<f64> = (0..left).map(|i| gamma * i as f64 / left as f64).collect();
    nodes.extend((0..=right).map(|i| gamma + (1.0 - gamma) * i as f64 / right as f64));
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::PiecewiseCoefficient;
    use crate::field::{Polynomial, SineSeries};
    use crate::motion::MotionMap;

    fn heat(boundary: Boundary) -> SpatialOperator {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        SpatialOperator::laplacian(PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap(), boundary).unwrap()
    }

    #[test]
    fn form_of_sine() {
        let op = heat(Boundary::Dirichlet);
        let s = SineSeries(vec![1.0]);
        let v = op.apply_form(0.3, &s, &s, &NormContext::default()).unwrap();
        assert!((v - PI * PI / 2.0).abs() < 1e-12);
        let zero = SineSeries(vec![0.0]);
        assert_eq!(op.apply_form(0.3, &zero, &zero, &NormContext::default()).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_diffusion_exact_integral() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let coeff = PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap();
        let op = SpatialOperator::new(
            ScalarField::PerBranch { left: 1.0, right: 2.0 },
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            coeff,
            Boundary::Dirichlet,
        )
        .unwrap();
        let w = Polynomial(vec![0.0, 1.0, -1.0]);
        // ∫₀^½ (1-2x)² + 2 ∫_½^1 (1-2x)² = 1/6 + 2/6
        let v = op.apply_form(0.2, &w, &w, &NormContext::default()).unwrap();
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_violation_is_rejected() {
        let op = heat(Boundary::Dirichlet);
        let w = Polynomial(vec![1.0]);
        assert!(op.apply_form(0.0, &w, &w, &NormContext::default()).is_err());
        assert!(heat(Boundary::Neumann).apply_form(0.0, &w, &w, &NormContext::default()).is_err() == false);
    }

    #[test]
    fn lambda1_arithmetic() {
        assert_eq!(lambda1(2.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 8.0);
        assert_eq!(lambda1(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(lambda1(1.0, 1.0, 0.0, 0.5, 1.0).unwrap(), 1.0);
        assert!(lambda1(1.0, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn sharp_coercivity_on_first_eigenfunction() {
        let op = heat(Boundary::Dirichlet);
        let c = op.constants();
        assert!((c.c_a - 1.0 / (1.0 + 1.0 / (PI * PI))).abs() < 1e-15);
        assert_eq!(c.lambda0, c.lambda1);
        let ctx = NormContext::default();
        let m = op.coercivity_margin(0.4, &SineSeries(vec![1.0]), &ctx).unwrap();
        assert!(m.abs() < 1e-10, "{m}");
        let m = op.coercivity_margin(0.4, &SineSeries(vec![0.3, -0.2, 0.5]), &ctx).unwrap();
        assert!(m > 0.0);
        assert!(op.coercivity_margin(0.4, &SineSeries(vec![0.0]), &ctx).is_err());
    }

    #[test]
    fn halved_constant_leaves_slack() {
        let op = heat(Boundary::Dirichlet);
        let c = op.constants();
        let declared = DeclaredConstants {
            c_a: 0.5 * c.c_a,
            big_c_a: c.big_c_a,
            lambda0: None,
        };
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let half = SpatialOperator::with_declared(
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap(),
            Boundary::Dirichlet,
            declared,
        )
        .unwrap();
        let ctx = NormContext::default();
        for k in 1..6 {
            let mut coeffs = vec![0.0; k];
            coeffs[k - 1] = 1.0;
            coeffs[0] += 0.25;
            assert!(half.coercivity_margin(0.5, &SineSeries(coeffs), &ctx).unwrap() > 0.0);
        }
    }

    #[test]
    fn declared_constants_are_validated() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let bad = SpatialOperator::with_declared(
            ScalarField::constant(1.0),
            ScalarField::constant(0.0),
            ScalarField::constant(0.0),
            PiecewiseCoefficient::constants(1.0, 1.0, id).unwrap(),
            Boundary::Dirichlet,
            DeclaredConstants {
                c_a: 0.99,
                big_c_a: 2.0,
                lambda0: Some(0.0),
            },
        );
        assert!(bad.is_err());
    }

    #[test]
    fn neumann_without_reaction_gets_lifted_shift() {
        let op = heat(Boundary::Neumann);
        let c = op.constants();
        assert_eq!(c.c_a, 1.0);
        assert!(c.lambda0 > c.lambda1);
        let ctx = NormContext {
            boundary: Boundary::Neumann,
            ..NormContext::default()
        };
        let w = crate::field::CosineSeries(vec![1.0, 0.5]);
        assert!(op.coercivity_margin(0.0, &w, &ctx).unwrap() >= -1e-10);
    }

    #[test]
    fn shift_formulas() {
        let op = heat(Boundary::Dirichlet);
        let zero = op.shifted_by(0.0).unwrap();
        assert_eq!(zero, {
            let mut o = op.clone();
            o.constants.lambda0 = op.constants.lambda0;
            o
        });
        let one = op.shifted_by(1.0).unwrap();
        assert_eq!(one.alpha_shift(), 1.0);
        assert_eq!(one.effective_reaction(0.3, 0.2, Side::One), 1.0);
        assert!((one.constants().big_c_a - (op.constants().big_c_a + 1.0)).abs() < 1e-15);
        let full = op.shifted().unwrap();
        assert_eq!(full.constants().lambda0, 0.0);
        assert_eq!(full.constants().c_a, op.constants().c_a);
    }

    #[test]
    fn fitted_grid_contains_interface() {
        let g = fitted_grid(7, 0.3);
        assert!(g.contains(&0.3));
        assert_eq!(g.len(), 8);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
