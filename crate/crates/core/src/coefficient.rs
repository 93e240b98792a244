//! The two-branch coefficient `α` and the global constants `α₀`, `C_α`, `C_v`.
//!
//! Branches are given in Lagrangian form, as functions of the initial position
//! `x₀ = Φ⁻¹(x, t)` and time, so each branch is smooth on its moving closure.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::motion::{MotionMap, Side, INTERFACE_TOL};

/// A branch of `α` as a function of `(x₀, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchFunction {
    /// `value`.
    Constant { value: f64 },
    /// `value + rate · t`.
    LinearInTime { value: f64, rate: f64 },
    /// `scale · (1 + rate · t) · (1 + amplitude · sin(wavenumber · π · x₀))`.
    Product {
        scale: f64,
        rate: f64,
        amplitude: f64,
        wavenumber: f64,
    },
}

impl BranchFunction {
    /// `(value, ∂ₜ at fixed x₀, ∂ₓ₀)`.
    fn lagrangian(&self, x0: f64, t: f64) -> (f64, f64, f64) {
        match *self {
            BranchFunction::Constant { value } => (value, 0.0, 0.0),
            BranchFunction::LinearInTime { value, rate } => (value + rate * t, rate, 0.0),
            BranchFunction::Product {
                scale,
                rate,
                amplitude,
                wavenumber,
            } => {
                let time = 1.0 + rate * t;
                let w = wavenumber * PI;
                let space = 1.0 + amplitude * (w * x0).sin();
                let space_dx = amplitude * w * (w * x0).cos();
                (scale * time * space, scale * rate * space, scale * time * space_dx)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            BranchFunction::Constant { .. } => true,
            BranchFunction::LinearInTime { rate, .. } => rate == 0.0,
            BranchFunction::Product { rate, amplitude, .. } => rate == 0.0 && amplitude == 0.0,
        }
    }
}

/// `α` with its Eulerian derivatives at a point, tagged with the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSample {
    pub value: f64,
    pub dt_value: f64,
    pub dx_value: f64,
    pub side: Side,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalConstants {
    pub c_alpha: f64,
    pub c_v: f64,
    pub alpha0: f64,
}

/// Samples per direction used to certify the global constants.
pub const CERTIFY_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCoefficient {
    branches: [BranchFunction; 2],
    active: [bool; 2],
    alpha0: f64,
    motion: MotionMap,
}

impl PiecewiseCoefficient {
    /// Both branches active. Use [`PiecewiseCoefficient::with_activity`] for
    /// the degenerate case.
    pub fn new(branch1: BranchFunction, branch2: BranchFunction, alpha0: f64, motion: MotionMap) -> Result<Self> {
        Self::with_activity(branch1, true, branch2, true, alpha0, motion)
    }

    pub fn with_activity(
        branch1: BranchFunction,
        active1: bool,
        branch2: BranchFunction,
        active2: bool,
        alpha0: f64,
        motion: MotionMap,
    ) -> Result<Self> {
        if !active1 && !active2 {
            return Err(Error::config("at least one branch of the coefficient must be active"));
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::config(format!("alpha0 = {alpha0} must be positive")));
        }
        let coeff = Self {
            branches: [branch1, branch2],
            active: [active1, active2],
            alpha0,
            motion,
        };
        coeff.validate_lower_bound()?;
        Ok(coeff)
    }

    /// `α₁ = value1`, `α₂ = value2` constants; a zero value marks the branch
    /// inactive.
    pub fn constants(value1: f64, value2: f64, motion: MotionMap) -> Result<Self> {
        let alpha0 = [value1, value2].into_iter().filter(|v| *v != 0.0).fold(f64::INFINITY, f64::min);
        Self::with_activity(
            BranchFunction::Constant { value: value1 },
            value1 != 0.0,
            BranchFunction::Constant { value: value2 },
            value2 != 0.0,
            if alpha0.is_finite() { alpha0 } else { 1.0 },
            motion,
        )
    }

    pub fn motion(&self) -> &MotionMap {
        &self.motion
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn is_active(&self, side: Side) -> bool {
        self.active[side.index()]
    }

    pub fn branch(&self, side: Side) -> &BranchFunction {
        &self.branches[side.index()]
    }

    /// True when one branch is inactive.
    pub fn is_degenerate(&self) -> bool {
        !(self.active[0] && self.active[1])
    }

    /// True when every active branch is constant.
    pub fn is_piecewise_constant(&self) -> bool {
        (0..2).all(|i| !self.active[i] || self.branches[i].is_constant())
    }

    /// The branch on `side` at `(x, t)`, without checking that `x` lies on
    /// that side. Quadrature calls this with the side of its sub-interval.
    pub fn sample(&self, x: f64, t: f64, side: Side) -> BranchSample {
        if !self.active[side.index()] {
            return BranchSample {
                value: 0.0,
                dt_value: 0.0,
                dx_value: 0.0,
                side,
            };
        }
        let x0 = self.motion.inverse(x, t);
        let (value, dt0, dx0) = self.branches[side.index()].lagrangian(x0, t);
        let (dt_value, dx_value) = if dx0 == 0.0 {
            (dt0, 0.0)
        } else {
            (
                dt0 + dx0 * self.motion.inverse_dt(x, t),
                dx0 * self.motion.inverse_dx(x, t),
            )
        };
        BranchSample {
            value,
            dt_value,
            dx_value,
            side,
        }
    }

    pub fn value(&self, x: f64, t: f64, side: Side) -> f64 {
        self.sample(x, t, side).value
    }

    fn side_checked(&self, x: f64, t: f64) -> Result<Side> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=self.motion.horizon()).contains(&t) {
            return Err(Error::domain(format!("({x}, {t}) outside [0, 1] × [0, {}]", self.motion.horizon())));
        }
        let gamma = self.motion.gamma(t);
        if (x - gamma).abs() <= INTERFACE_TOL {
            return Err(Error::InterfaceTrace { x, t, gamma });
        }
        Ok(if x < gamma { Side::One } else { Side::Two })
    }

    pub fn evaluate_branch(&self, x: f64, t: f64) -> Result<BranchSample> {
        let side = self.side_checked(x, t)?;
        Ok(self.sample(x, t, side))
    }

    pub fn support_contains(&self, x: f64, t: f64) -> Result<bool> {
        Ok(self.active[self.side_checked(x, t)?.index()])
    }

    /// Lagrangian sample grid of one branch closure: `(x, t)` pairs with
    /// `x = Φ(x₀, t)`.
    fn grid(&self, side: Side) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (lo, hi) = match side {
            Side::One => (0.0, self.motion.gamma0()),
            Side::Two => (self.motion.gamma0(), 1.0),
        };
        let n = CERTIFY_SAMPLES;
        let horizon = self.motion.horizon();
        (0..n).flat_map(move |k| {
            let t = horizon * k as f64 / (n - 1) as f64;
            (0..n).map(move |i| {
                let x0 = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (self.motion.forward(x0, t), t)
            })
        })
    }

    fn validate_lower_bound(&self) -> Result<()> {
        for side in [Side::One, Side::Two] {
            if !self.is_active(side) {
                continue;
            }
            for (x, t) in self.grid(side) {
                let a = self.sample(x, t, side).value;
                if a < self.alpha0 {
                    return Err(Error::config(format!(
                        "coefficient branch {} takes value {a} < alpha0 = {} at (x, t) = ({x}, {t})",
                        side.number(),
                        self.alpha0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Certified constants: on each branch grid, the maximum of the sampled
    /// quantity plus 1% of its spread over that grid.
    pub fn global_constants(&self) -> Result<GlobalConstants> {
        self.validate_lower_bound()?;
        let mut c_alpha: f64 = 0.0;
        let mut c_v: f64 = 0.0;
        let m = &self.motion;
        for side in [Side::One, Side::Two] {
            let mut alpha = Spread::default();
            let mut vel = Spread::default();
            for (x, t) in self.grid(side) {
                let s = self.sample(x, t, side);
                alpha.push(s.value.abs().max(s.dt_value.abs()).max(s.dx_value.abs()));
                vel.push(m.speed(x, t).abs().max(m.speed_dt(x, t).abs()).max(m.speed_dx(x, t).abs()));
            }
            c_alpha = c_alpha.max(alpha.certified());
            c_v = c_v.max(vel.certified());
        }
        Ok(GlobalConstants {
            c_alpha,
            c_v,
            alpha0: self.alpha0,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Spread {
    min: f64,
    max: f64,
}

impl Default for Spread {
    fn default() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Spread {
    fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn certified(&self) -> f64 {
        self.max + 0.01 * (self.max - self.min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flow() -> MotionMap {
        MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap()
    }

    #[test]
    fn constant_branches() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let c = PiecewiseCoefficient::constants(1.0, 2.0, id).unwrap();
        let s = c.evaluate_branch(0.2, 0.3).unwrap();
        assert_eq!((s.value, s.dt_value, s.dx_value, s.side), (1.0, 0.0, 0.0, Side::One));
        assert_eq!(c.evaluate_branch(0.7, 0.3).unwrap().value, 2.0);
        assert!(matches!(c.evaluate_branch(0.5, 0.3), Err(Error::InterfaceTrace { .. })));
    }

    #[test]
    fn degenerate_branch_is_zero() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let c = PiecewiseCoefficient::constants(1.0, 0.0, id).unwrap();
        let s = c.evaluate_branch(0.8, 0.1).unwrap();
        assert_eq!((s.value, s.dt_value, s.dx_value, s.side), (0.0, 0.0, 0.0, Side::Two));
        assert!(!c.support_contains(0.8, 0.1).unwrap());
        assert!(c.support_contains(0.2, 0.1).unwrap());
        assert!(c.is_degenerate());
    }

    #[test]
    fn linear_in_time_branch() {
        let c = PiecewiseCoefficient::new(
            BranchFunction::LinearInTime { value: 1.0, rate: 1.0 },
            BranchFunction::Constant { value: 2.0 },
            1.0,
            flow(),
        )
        .unwrap();
        let s = c.evaluate_branch(0.2, 0.5).unwrap();
        assert!((s.value - 1.5).abs() < 1e-15);
        assert!((s.dt_value - 1.0).abs() < 1e-15);
        assert_eq!(s.dx_value, 0.0);
    }

    #[test]
    fn constants_of_reference_cases() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let g = PiecewiseCoefficient::constants(1.0, 2.0, id).unwrap().global_constants().unwrap();
        assert_eq!((g.c_alpha, g.c_v, g.alpha0), (2.0, 0.0, 1.0));
        let g = PiecewiseCoefficient::constants(1.0, 0.0, id).unwrap().global_constants().unwrap();
        assert_eq!((g.c_alpha, g.c_v, g.alpha0), (1.0, 0.0, 1.0));
        let g = PiecewiseCoefficient::constants(1.0, 2.0, flow()).unwrap().global_constants().unwrap();
        let peak = 0.1 * 4.0 * PI * PI;
        assert!(g.c_v >= peak && g.c_v <= 1.011 * peak, "{}", g.c_v);
    }

    #[test]
    fn rejects_bad_configurations() {
        let id = MotionMap::identity(0.5, 1.0).unwrap();
        let c = BranchFunction::Constant { value: 1.0 };
        assert!(PiecewiseCoefficient::with_activity(c, false, c, false, 1.0, id).is_err());
        assert!(PiecewiseCoefficient::new(c, c, -1.0, id).is_err());
        assert!(PiecewiseCoefficient::new(c, BranchFunction::Constant { value: 0.5 }, 1.0, id).is_err());
    }

    fn product_coefficient() -> PiecewiseCoefficient {
        PiecewiseCoefficient::new(
            BranchFunction::Product {
                scale: 1.0,
                rate: 0.5,
                amplitude: 0.3,
                wavenumber: 2.0,
            },
            BranchFunction::LinearInTime { value: 2.0, rate: -0.5 },
            0.7,
            flow(),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn branch_selection_follows_motion(x0 in 0.001f64..0.999, t in 0.0f64..=1.0) {
            prop_assume!((x0 - 0.5).abs() > 1e-6);
            let c = product_coefficient();
            let x = c.motion().forward(x0, t);
            let side = c.evaluate_branch(x, t).unwrap().side;
            prop_assert_eq!(side, if x0 < 0.5 { Side::One } else { Side::Two });
        }

        #[test]
        fn derivatives_match_differences(x0 in 0.01f64..0.99, t in 0.01f64..0.99) {
            prop_assume!((x0 - 0.5).abs() > 0.02);
            let c = product_coefficient();
            let x = c.motion().forward(x0, t);
            let s = c.evaluate_branch(x, t).unwrap();
            let h = 1e-5;
            let fdt = (c.value(x, t + h, s.side) - c.value(x, t - h, s.side)) / (2.0 * h);
            let fdx = (c.value(x + h, t, s.side) - c.value(x - h, t, s.side)) / (2.0 * h);
            prop_assert!((s.dt_value - fdt).abs() < 1e-7);
            prop_assert!((s.dx_value - fdx).abs() < 1e-7);
        }
    }
}
