//! Scalar fields used as solutions, data and test functions.

use std::f64::consts::PI;

use crate::motion::{MotionMap, Side};

/// A field on `[0, 1] × [0, T]` that is smooth on each side of the interface.
/// Derivatives are the classical Eulerian ones of the branch selected by `side`.
pub trait SpaceTimeField: Sync {
    fn value(&self, x: f64, t: f64, side: Side) -> f64;
    fn dt(&self, x: f64, t: f64, side: Side) -> f64;
    fn dx(&self, x: f64, t: f64, side: Side) -> f64;

    /// Spatial points at time `t` where the field is not smooth (besides the
    /// interface), so quadrature can split there.
    fn space_breaks(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Times at which the field is not smooth in `t`.
    fn time_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A function of space only, used as a member of `V`.
pub trait SpatialField: Sync {
    fn value(&self, x: f64) -> f64;
    fn dx(&self, x: f64) -> f64;
    fn breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Closed-form fields with per-branch formulas.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogField {
    /// `c`.
    Constant { value: f64 },
    /// `x (1 + t)`.
    XLinear,
    /// `sin(π x) (1 + t)`.
    SinLinear,
    /// `sin(k π x) e^{-t}`.
    SinExp { k: f64 },
    /// `x (1 - x) (1 + t²)`.
    PolyQuad,
    /// `sin(π x) cos(3 t)`.
    SinCos,
    /// `x² (1 - x) (2 + sin t)`.
    CubicMix,
    /// `sin(π t)`, constant in space.
    TimeSine,
    /// `t`, constant in space.
    TimeLinear,
    /// `sin(π x) |t - center|`: a kink in time.
    TimeKink { center: f64 },
    /// `left (1 + t)` on side 1 and `right (1 + t)` on side 2 (jumps across
    /// the interface; not a member of `V`).
    BranchJump { left: f64, right: f64 },
    /// `(1 + t) sin(π x) (x - γ(t)) / kᵢ` on side `i`: continuous, with a
    /// kink at the interface such that `k ∂ₓu` is continuous.
    FluxJump { k1: f64, k2: f64, motion: MotionMap },
    /// `c0 + cx x + ct t`.
    Affine { c0: f64, cx: f64, ct: f64 },
    /// `amplitude · sin(k π x)`, constant in time.
    SinMode { k: f64, amplitude: f64 },
}

impl CatalogField {
    /// Second spatial derivative of the branch.
    pub fn dxx(&self, x: f64, t: f64, side: Side) -> f64 {
        let s = (PI * x).sin();
        match self {
            CatalogField::Constant { .. }
            | CatalogField::XLinear
            | CatalogField::TimeSine
            | CatalogField::TimeLinear
            | CatalogField::BranchJump { .. }
            | CatalogField::Affine { .. } => 0.0,
            CatalogField::SinLinear => -PI * PI * s * (1.0 + t),
            CatalogField::SinExp { k } => -(k * PI).powi(2) * (k * PI * x).sin() * (-t).exp(),
            CatalogField::PolyQuad => -2.0 * (1.0 + t * t),
            CatalogField::SinCos => -PI * PI * s * (3.0 * t).cos(),
            CatalogField::CubicMix => (2.0 - 6.0 * x) * (2.0 + t.sin()),
            CatalogField::TimeKink { center } => -PI * PI * s * (t - center).abs(),
            CatalogField::FluxJump { k1, k2, motion } => {
                let k = if side == Side::One { *k1 } else { *k2 };
                let g = motion.gamma(t);
                let c = (PI * x).cos();
                (1.0 + t) * (2.0 * PI * c - PI * PI * s * (x - g)) / k
            }
            CatalogField::SinMode { k, amplitude } => -amplitude * (k * PI).powi(2) * (k * PI * x).sin(),
        }
    }

    /// Short stable name, used in diagnostics.
    pub fn name(&self) -> String {
        match self {
            CatalogField::Constant { value } => format!("constant({value})"),
            CatalogField::XLinear => "x_linear".into(),
            CatalogField::SinLinear => "sin_linear".into(),
            CatalogField::SinExp { k } => format!("sin_exp({k})"),
            CatalogField::PolyQuad => "poly_quad".into(),
            CatalogField::SinCos => "sin_cos".into(),
            CatalogField::CubicMix => "cubic_mix".into(),
            CatalogField::TimeSine => "time_sine".into(),
            CatalogField::TimeLinear => "time_linear".into(),
            CatalogField::TimeKink { center } => format!("time_kink({center})"),
            CatalogField::BranchJump { left, right } => format!("branch_jump({left},{right})"),
            CatalogField::FluxJump { k1, k2, .. } => format!("flux_jump({k1},{k2})"),
            CatalogField::Affine { c0, cx, ct } => format!("affine({c0},{cx},{ct})"),
            CatalogField::SinMode { k, amplitude } => format!("sin_mode({k},{amplitude})"),
        }
    }
}

impl SpaceTimeField for CatalogField {
    fn value(&self, x: f64, t: f64, side: Side) -> f64 {
        let s = (PI * x).sin();
        match self {
            CatalogField::Constant { value } => *value,
            CatalogField::XLinear => x * (1.0 + t),
            CatalogField::SinLinear => s * (1.0 + t),
            CatalogField::SinExp { k } => (k * PI * x).sin() * (-t).exp(),
            CatalogField::PolyQuad => x * (1.0 - x) * (1.0 + t * t),
            CatalogField::SinCos => s * (3.0 * t).cos(),
            CatalogField::CubicMix => x * x * (1.0 - x) * (2.0 + t.sin()),
            CatalogField::TimeSine => (PI * t).sin(),
            CatalogField::TimeLinear => t,
            CatalogField::TimeKink { center } => s * (t - center).abs(),
            CatalogField::BranchJump { left, right } => {
                (1.0 + t) * if side == Side::One { *left } else { *right }
            }
            CatalogField::FluxJump { k1, k2, motion } => {
                let k = if side == Side::One { *k1 } else { *k2 };
                (1.0 + t) * s * (x - motion.gamma(t)) / k
            }
            CatalogField::Affine { c0, cx, ct } => c0 + cx * x + ct * t,
            CatalogField::SinMode { k, amplitude } => amplitude * (k * PI * x).sin(),
        }
    }

    fn dt(&self, x: f64, t: f64, side: Side) -> f64 {
        let s = (PI * x).sin();
        match self {
            CatalogField::Constant { .. } | CatalogField::SinMode { .. } => 0.0,
            CatalogField::XLinear => x,
            CatalogField::SinLinear => s,
            CatalogField::SinExp { k } => -(k * PI * x).sin() * (-t).exp(),
            CatalogField::PolyQuad => x * (1.0 - x) * 2.0 * t,
            CatalogField::SinCos => -3.0 * s * (3.0 * t).sin(),
            CatalogField::CubicMix => x * x * (1.0 - x) * t.cos(),
            CatalogField::TimeSine => PI * (PI * t).cos(),
            CatalogField::TimeLinear => 1.0,
            CatalogField::TimeKink { center } => s * (t - center).signum(),
            CatalogField::BranchJump { left, right } => {
                if side == Side::One {
                    *left
                } else {
                    *right
                }
            }
            CatalogField::FluxJump { k1, k2, motion } => {
                let k = if side == Side::One { *k1 } else { *k2 };
                let g = motion.gamma(t);
                (s * (x - g) - (1.0 + t) * s * motion.gamma_rate(t)) / k
            }
            CatalogField::Affine { ct, .. } => *ct,
        }
    }

    fn dx(&self, x: f64, t: f64, side: Side) -> f64 {
        let s = (PI * x).sin();
        let c = (PI * x).cos();
        match self {
            CatalogField::Constant { .. }
            | CatalogField::TimeSine
            | CatalogField::TimeLinear
            | CatalogField::BranchJump { .. } => 0.0,
            CatalogField::XLinear => 1.0 + t,
            CatalogField::SinLinear => PI * c * (1.0 + t),
            CatalogField::SinExp { k } => k * PI * (k * PI * x).cos() * (-t).exp(),
            CatalogField::PolyQuad => (1.0 - 2.0 * x) * (1.0 + t * t),
            CatalogField::SinCos => PI * c * (3.0 * t).cos(),
            CatalogField::CubicMix => (2.0 * x - 3.0 * x * x) * (2.0 + t.sin()),
            CatalogField::TimeKink { center } => PI * c * (t - center).abs(),
            CatalogField::FluxJump { k1, k2, motion } => {
                let k = if side == Side::One { *k1 } else { *k2 };
                let g = motion.gamma(t);
                (1.0 + t) * (PI * c * (x - g) + s) / k
            }
            CatalogField::Affine { cx, .. } => *cx,
            CatalogField::SinMode { k, amplitude } => amplitude * k * PI * (k * PI * x).cos(),
        }
    }

    fn time_breaks(&self) -> Vec<f64> {
        match self {
            CatalogField::TimeKink { center } => vec![*center],
            _ => Vec::new(),
        }
    }
}

/// Smooth bump `amplitude · exp(1 − 1/(1 − s²))`, `s = (t − center)/radius`,
/// compactly supported in `(center − radius, center + radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBump {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl TimeBump {
    pub fn new(center: f64, radius: f64, amplitude: f64) -> Self {
        Self { center, radius, amplitude }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn dt(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.radius;
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            self.value(t) * (-2.0 * s / (q * q)) / self.radius
        }
    }
}

/// `Σ cₖ sin(k π x)`, `k = 1, 2, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeries(pub Vec<f64>);

impl SpatialField for SineSeries {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().enumerate().map(|(i, c)| c * ((i + 1) as f64 * PI * x).sin()).sum()
    }

    fn dx(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = (i + 1) as f64 * PI;
                c * k * (k * x).cos()
            })
            .sum()
    }
}

/// `c₀ + Σ cₖ cos(k π x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeries(pub Vec<f64>);

impl SpatialField for CosineSeries {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().enumerate().map(|(k, c)| c * (k as f64 * PI * x).cos()).sum()
    }

    fn dx(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = k as f64 * PI;
                -c * w * (w * x).sin()
            })
            .sum()
    }
}

/// `Σ cₖ xᵏ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl SpatialField for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn dx(&self, x: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
    }
}

/// Continuous piecewise-linear function on a partition of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), values.len());
        assert!(nodes.len() >= 2);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]), "nodes must increase");
        Self { nodes, values }
    }

    fn cell(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&p| p <= x);
        k.clamp(1, self.nodes.len() - 1) - 1
    }
}

impl SpatialField for PiecewiseLinear {
    fn value(&self, x: f64) -> f64 {
        let i = self.cell(x);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.values[i] + s * self.values[i + 1]
    }

    fn dx(&self, x: f64) -> f64 {
        let i = self.cell(x);
        (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i])
    }

    fn breaks(&self) -> Vec<f64> {
        self.nodes.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_checks(f: &dyn SpaceTimeField, x: f64, t: f64, side: Side) {
        let h = 1e-5;
        let dt = (f.value(x, t + h, side) - f.value(x, t - h, side)) / (2.0 * h);
        let dx = (f.value(x + h, t, side) - f.value(x - h, t, side)) / (2.0 * h);
        assert!((f.dt(x, t, side) - dt).abs() < 1e-7, "dt mismatch");
        assert!((f.dx(x, t, side) - dx).abs() < 1e-7, "dx mismatch");
    }

    #[test]
    fn catalog_derivatives_match_differences() {
        let motion = MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap();
        let fields = vec![
            CatalogField::XLinear,
            CatalogField::SinLinear,
            CatalogField::SinExp { k: 2.0 },
            CatalogField::PolyQuad,
            CatalogField::SinCos,
            CatalogField::CubicMix,
            CatalogField::TimeSine,
            CatalogField::TimeKink { center: 0.5 },
            CatalogField::BranchJump { left: 1.0, right: 2.0 },
            CatalogField::FluxJump { k1: 1.0, k2: 3.0, motion },
            CatalogField::Affine { c0: 1.0, cx: 0.5, ct: 1.0 },
            CatalogField::SinMode { k: 1.0, amplitude: 2.0 },
        ];
        for f in &fields {
            for &(x, t) in &[(0.2, 0.3), (0.7, 0.8)] {
                let side = motion.side_of(x, t).unwrap();
                fd_checks(f, x, t, side);
                let h = 1e-4;
                let dxx = (f.dx(x + h, t, side) - f.dx(x - h, t, side)) / (2.0 * h);
                let d = f.dxx(x, t, side);
                assert!((d - dxx).abs() < 1e-6 * (1.0 + d.abs()), "{}", f.name());
            }
        }
    }

    #[test]
    fn flux_jump_profile_is_continuous_with_continuous_flux() {
        let motion = MotionMap::separable_flow(0.1, 2.0 * PI, 0.5, 1.0).unwrap();
        let f = CatalogField::FluxJump { k1: 1.0, k2: 3.0, motion };
        for &t in &[0.0, 0.3, 0.9] {
            let g = motion.gamma(t);
            assert!((f.value(g, t, Side::One) - f.value(g, t, Side::Two)).abs() < 1e-15);
            let q1 = 1.0 * f.dx(g, t, Side::One);
            let q2 = 3.0 * f.dx(g, t, Side::Two);
            assert!((q1 - q2).abs() < 1e-14);
        }
    }

    #[test]
    fn bump_is_compact_and_smooth() {
        let b = TimeBump::new(0.5, 0.2, 1.0);
        assert_eq!(b.value(0.3), 0.0);
        assert_eq!(b.value(0.71), 0.0);
        assert_eq!(b.value(0.5), 1.0);
        let h = 1e-6;
        for &t in &[0.35, 0.45, 0.62] {
            let fd = (b.value(t + h) - b.value(t - h)) / (2.0 * h);
            assert!((b.dt(t) - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn spatial_fields() {
        let p = Polynomial(vec![0.0, 1.0, -1.0]);
        assert!((p.value(0.3) - 0.21).abs() < 1e-15);
        assert!((p.dx(0.3) - 0.4).abs() < 1e-15);
        let s = SineSeries(vec![1.0]);
        assert!(s.value(1.0).abs() < 1e-15);
        let c = CosineSeries(vec![1.0, 1.0]);
        assert!((c.value(0.0) - 2.0).abs() < 1e-15);
        let l = PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]);
        assert!((l.value(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(l.dx(0.75), -2.0);
        assert_eq!(l.value(1.0), 0.0);
    }
}
