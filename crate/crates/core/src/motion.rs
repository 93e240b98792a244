//! Interface kinematics on the fixed domain `(0, 1)`.
//!
//! A [`MotionMap`] carries the family of diffeomorphisms `Φ(·, t)`, their
//! inverses and the velocity field `v = Φ̇ ∘ Φ⁻¹`. The interface is the single
//! point `γ(t) = Φ(γ₀, t)`; subdomain 1 is the part left of it.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::quadrature;

/// Which side of the interface a point or integrand belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Subdomain 1, left of the interface.
    One,
    /// Subdomain 2, right of the interface.
    Two,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::One => 0,
            Side::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Side::One => 1,
            Side::Two => 2,
        }
    }
}

/// Closed-form motion families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionFamily {
    /// `Φ(x, t) = x`.
    Identity,
    /// Exact flow of `v(x, t) = a ω cos(ω t) sin(π x)`:
    /// `Φ(x₀, t) = (2/π) arctan(tan(π x₀ / 2) exp(π a sin(ω t)))`.
    SeparableFlow { amplitude: f64, frequency: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionMap {
    family: MotionFamily,
    gamma0: f64,
    horizon: f64,
}

/// Points closer than this to the interface are rejected by side queries.
pub const INTERFACE_TOL: f64 = 1e-14;

impl MotionMap {
    pub fn new(family: MotionFamily, gamma0: f64, horizon: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 < 1.0) {
            return Err(Error::config(format!("initial interface {gamma0} must lie in (0, 1)")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!("horizon {horizon} must be positive")));
        }
        if let MotionFamily::SeparableFlow { amplitude, frequency } = family {
            if !amplitude.is_finite() || !frequency.is_finite() {
                return Err(Error::config("separable flow parameters must be finite"));
            }
        }
        Ok(Self { family, gamma0, horizon })
    }

    pub fn identity(gamma0: f64, horizon: f64) -> Result<Self> {
        Self::new(MotionFamily::Identity, gamma0, horizon)
    }

    pub fn separable_flow(amplitude: f64, frequency: f64, gamma0: f64, horizon: f64) -> Result<Self> {
        Self::new(MotionFamily::SeparableFlow { amplitude, frequency }, gamma0, horizon)
    }

    pub fn family(&self) -> MotionFamily {
        self.family
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_static(&self) -> bool {
        matches!(self.family, MotionFamily::Identity)
            || matches!(self.family, MotionFamily::SeparableFlow { amplitude, frequency } if amplitude == 0.0 || frequency == 0.0)
    }

    fn check(&self, x: f64, t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("position {x} outside [0, 1]")));
        }
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// `G(t) = a sin(ω t)`, the time integral of the velocity amplitude.
    fn stretch(&self, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 0.0,
            MotionFamily::SeparableFlow { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }

    /// `Φ(x, t)` without range checks.
    pub fn forward(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => x,
            MotionFamily::SeparableFlow { .. } => flow(x, self.stretch(t)),
        }
    }

    /// `Φ(·, t)⁻¹(x)` without range checks.
    pub fn inverse(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => x,
            MotionFamily::SeparableFlow { .. } => flow(x, -self.stretch(t)),
        }
    }

    /// `∂Φ/∂x₀ (x₀, t)`.
    pub fn forward_dx(&self, x0: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 1.0,
            MotionFamily::SeparableFlow { .. } => flow_dx(x0, self.stretch(t)),
        }
    }

    /// `∂/∂x [Φ(·, t)⁻¹](x)`.
    pub fn inverse_dx(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 1.0,
            MotionFamily::SeparableFlow { .. } => flow_dx(x, -self.stretch(t)),
        }
    }

    /// `∂/∂t [Φ(·, t)⁻¹](x) = −v(x, t) ∂ₓΦ⁻¹(x, t)`.
    pub fn inverse_dt(&self, x: f64, t: f64) -> f64 {
        -self.speed(x, t) * self.inverse_dx(x, t)
    }

    /// `v(x, t)` without range checks.
    pub fn speed(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 0.0,
            MotionFamily::SeparableFlow { amplitude, frequency } => {
                amplitude * frequency * (frequency * t).cos() * (PI * x).sin()
            }
        }
    }

    /// `∂ₜv(x, t)`.
    pub fn speed_dt(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 0.0,
            MotionFamily::SeparableFlow { amplitude, frequency } => {
                -amplitude * frequency * frequency * (frequency * t).sin() * (PI * x).sin()
            }
        }
    }

    /// `∂ₓv(x, t)`.
    pub fn speed_dx(&self, x: f64, t: f64) -> f64 {
        match self.family {
            MotionFamily::Identity => 0.0,
            MotionFamily::SeparableFlow { amplitude, frequency } => {
                amplitude * frequency * PI * (frequency * t).cos() * (PI * x).cos()
            }
        }
    }

    pub fn forward_map(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.forward(x, t))
    }

    pub fn inverse_map(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.inverse(x, t))
    }

    pub fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.speed(x, t))
    }

    pub fn interface_position(&self, t: f64) -> Result<f64> {
        self.check(self.gamma0, t)?;
        Ok(self.gamma(t))
    }

    /// `γ(t)` without range checks.
    pub fn gamma(&self, t: f64) -> f64 {
        self.forward(self.gamma0, t)
    }

    /// `γ'(t) = v(γ(t), t)`.
    pub fn gamma_rate(&self, t: f64) -> f64 {
        self.speed(self.gamma(t), t)
    }

    /// Side of `x` at time `t`; `None` on the interface itself.
    pub fn side_of(&self, x: f64, t: f64) -> Option<Side> {
        let g = self.gamma(t);
        if (x - g).abs() <= INTERFACE_TOL {
            None
        } else if x < g {
            Some(Side::One)
        } else {
            Some(Side::Two)
        }
    }

    /// Closure of subdomain `side` at time `t` as an interval.
    pub fn subdomain(&self, side: Side, t: f64) -> (f64, f64) {
        let g = self.gamma(t);
        match side {
            Side::One => (0.0, g),
            Side::Two => (g, 1.0),
        }
    }

    /// Residual of the transport identity for `f` at time `t`: the central
    /// difference of `∫ f dx` against `∫ (∂ₜf + ∂ₓ(f v)) dx`, both integrals
    /// split at the interface.
    pub fn reynolds_residual(&self, f: &dyn SpaceTimeField, t: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::domain("time step must be positive"));
        }
        if t - dt < 0.0 || t + dt > self.horizon {
            return Err(Error::domain(format!(
                "step too large: t ± dt = [{}, {}] leaves [0, {}]",
                t - dt,
                t + dt,
                self.horizon
            )));
        }
        const PANELS: usize = 8;
        const POINTS: usize = 16;
        let total = |s: f64| {
            quadrature::integrate_split(0.0, 1.0, self.gamma(s), PANELS, POINTS, |x, side| f.value(x, s, side))
        };
        let lhs = (total(t + dt) - total(t - dt)) / (2.0 * dt);
        let rhs = quadrature::integrate_split(0.0, 1.0, self.gamma(t), PANELS, POINTS, |x, side| {
            let v = self.speed(x, t);
            f.dt(x, t, side) + f.dx(x, t, side) * v + f.value(x, t, side) * self.speed_dx(x, t)
        });
        Ok((lhs - rhs).abs())
    }
}

fn flow(x: f64, stretch: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if stretch == 0.0 {
        return x;
    }
    let half = FRAC_PI_2 * x;
    let y = (half.sin() * (PI * stretch).exp()).atan2(half.cos());
    y / FRAC_PI_2
}

fn flow_dx(x: f64, stretch: f64) -> f64 {
    if stretch == 0.0 {
        return 1.0;
    }
    let s = (PI * stretch).exp();
    let half = FRAC_PI_2 * x;
    let (sn, cs) = half.sin_cos();
    s / (cs * cs + s * s * sn * sn)
}

/// Newton inversion of a monotone map `[0, 1] → [0, 1]`, for motions given
/// only by a forward map and its derivative. Iterates until the update is
/// below `1e-13` or fails after 50 steps.
pub fn newton_inverse<F, D>(forward: F, derivative: D, target: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    const TOL: f64 = 1e-13;
    const MAX_ITERS: usize = 50;
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::domain(format!("target {target} outside [0, 1]")));
    }
    let mut x = target;
    for _ in 0..MAX_ITERS {
        let d = derivative(x);
        if !(d > 0.0) {
            return Err(Error::numerical(format!("non-monotone map at x = {x} (derivative {d})")));
        }
        let step = (forward(x) - target) / d;
        x = (x - step).clamp(0.0, 1.0);
        if step.abs() < TOL {
            return Ok(x);
        }
    }
    Err(Error::numerical(format!("Newton inversion did not converge for target {target}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CatalogField;
    use proptest::prelude::*;

    fn flow_map() -> MotionMap {
        MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap()
    }

    /// Time at which `G(t) = a sin(ωt)` equals 0.1 for a = 0.1, ω = 2π.
    const T_G01: f64 = 0.25;

    #[test]
    fn identity_at_time_zero() {
        let m = flow_map();
        assert_eq!(m.forward_map(0.3, 0.0).unwrap(), 0.3);
        assert_eq!(MotionMap::identity(0.5, 1.0).unwrap().forward_map(0.3, 0.0).unwrap(), 0.3);
    }

    #[test]
    fn endpoints_are_fixed() {
        let m = flow_map();
        assert_eq!(m.forward_map(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(m.forward_map(1.0, 0.7).unwrap(), 1.0);
        assert_eq!(m.velocity(1.0, 0.3).unwrap().abs() < 1e-15, true);
    }

    #[test]
    fn closed_form_flow_reference_values() {
        // (2/π) atan(exp(0.1π)), evaluated with mpmath at 30 digits
        let m = flow_map();
        let expected = 0.598_394_524_536_567_9;
        assert!((m.forward_map(0.5, T_G01).unwrap() - expected).abs() < 1e-13);
        assert!((m.interface_position(T_G01).unwrap() - expected).abs() < 1e-13);
        assert!((m.inverse_map(expected, T_G01).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn velocity_values() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        assert_eq!(id.velocity(0.42, 0.3).unwrap(), 0.0);
        assert_eq!(id.inverse_map(0.42, 0.3).unwrap(), 0.42);
        let m = flow_map();
        assert!((m.velocity(0.5, 0.0).unwrap() - 0.1 * 2.0 * PI).abs() < 1e-15);
    }

    #[test]
    fn interface_position_static() {
        let id = MotionMap::identity(0.37, 2.0).unwrap();
        for t in [0.0, 0.5, 2.0] {
            assert_eq!(id.interface_position(t).unwrap(), 0.37);
        }
        assert_eq!(flow_map().interface_position(0.0).unwrap(), 0.5);
    }

    #[test]
    fn domain_violations() {
        let m = flow_map();
        assert!(m.forward_map(-0.1, 0.2).is_err());
        assert!(m.forward_map(0.5, 1.5).is_err());
        assert!(m.inverse_map(1.1, 0.2).is_err());
        assert!(m.velocity(0.5, -1.0).is_err());
        assert!(m.interface_position(2.0).is_err());
        assert!(MotionMap::identity(1.0, 1.0).is_err());
    }

    #[test]
    fn velocity_matches_composition_by_differences() {
        let m = flow_map();
        for &h in &[1e-3, 1e-4] {
            let mut worst: f64 = 0.0;
            for i in 0..50 {
                for k in 0..50 {
                    let x = i as f64 / 49.0;
                    let t = h + (1.0 - 2.0 * h) * k as f64 / 49.0;
                    let x0 = m.inverse(x, t);
                    let fd = (m.forward(x0, t + h) - m.forward(x0, t - h)) / (2.0 * h);
                    worst = worst.max((m.speed(x, t) - fd).abs());
                }
            }
            // |Φ⃛| ≤ a ω³ (1 + ...) ≈ 30, so C h² / 6 ≈ 5 h²
            assert!(worst <= 10.0 * h * h, "h={h}: {worst}");
        }
    }

    #[test]
    fn forward_map_is_monotone() {
        let m = flow_map();
        for &t in &[0.1, 0.25, 0.6, 0.9] {
            let mut prev = -1.0;
            for i in 0..1000 {
                let x = i as f64 / 999.0;
                let y = m.forward(x, t);
                assert!(y > prev);
                assert!(m.forward_dx(x, t) > 0.0);
                prev = y;
            }
        }
    }

    #[test]
    fn derivative_of_inverse_matches_differences() {
        let m = flow_map();
        let h = 1e-6;
        for &(x, t) in &[(0.2, 0.1), (0.6, 0.3), (0.9, 0.8)] {
            let fd = (m.inverse(x + h, t) - m.inverse(x - h, t)) / (2.0 * h);
            assert!((m.inverse_dx(x, t) - fd).abs() < 1e-8);
            let fdt = (m.inverse(x, t + h) - m.inverse(x, t - h)) / (2.0 * h);
            assert!((m.inverse_dt(x, t) - fdt).abs() < 1e-8);
            let fvt = (m.speed(x, t + h) - m.speed(x, t - h)) / (2.0 * h);
            assert!((m.speed_dt(x, t) - fvt).abs() < 1e-7);
            let fvx = (m.speed(x + h, t) - m.speed(x - h, t)) / (2.0 * h);
            assert!((m.speed_dx(x, t) - fvx).abs() < 1e-7);
        }
    }

    #[test]
    fn newton_inverse_agrees_with_closed_form() {
        let m = flow_map();
        for &t in &[0.1, 0.4] {
            for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
                let inv = newton_inverse(|y| m.forward(y, t), |y| m.forward_dx(y, t), x).unwrap();
                assert!((inv - m.inverse(x, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reynolds_residual_examples() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let one = CatalogField::Constant { value: 1.0 };
        assert!(id.reynolds_residual(&one, 0.5, 1e-3).unwrap() < 1e-12);
        let m = flow_map();
        assert!(m.reynolds_residual(&one, 0.5, 1e-3).unwrap() < 1e-10);
        let xt = CatalogField::XLinear;
        assert!(m.reynolds_residual(&xt, 0.4, 1e-4).unwrap() <= 1e-6);
        assert!(m.reynolds_residual(&xt, 0.99, 0.05).is_err());
    }

    #[test]
    fn reynolds_residual_is_second_order() {
        let m = flow_map();
        let f = CatalogField::BranchJump { left: 1.0, right: 2.0 };
        let r2 = m.reynolds_residual(&f, 0.4, 1e-2).unwrap();
        let r3 = m.reynolds_residual(&f, 0.4, 1e-3).unwrap();
        let order = (r2 / r3).log10();
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    proptest! {
        #[test]
        fn inverse_undoes_forward(x in 0.0f64..=1.0, t in 0.0f64..=1.0) {
            let m = flow_map();
            prop_assert!((m.inverse(m.forward(x, t), t) - x).abs() <= 1e-12);
        }

        #[test]
        fn sides_are_transported(x0 in 0.001f64..0.999, t in 0.0f64..=1.0) {
            let m = flow_map();
            prop_assume!((x0 - 0.5).abs() > 1e-6);
            let expected = if x0 < 0.5 { Side::One } else { Side::Two };
            prop_assert_eq!(m.side_of(m.forward(x0, t), t), Some(expected));
        }
    }
}
