//! Scenario files: JSON with every section documented in the README.
//! Unknown keys are rejected and defaults are filled in, so the normalized
//! dump re-parses to the same scenario.

use std::f64::consts::PI;
use std::path::Path;

use eip_core::calculus::NormContext;
use eip_core::operator::DeclaredConstants;
use eip_core::solver::benchmarks::Problem;
use eip_core::{
    Boundary, BranchFunction, CatalogField, MotionMap, PiecewiseCoefficient, ScalarField, SpatialOperator,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub motion: MotionSpec,
    pub coefficient: CoefficientSpec,
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub discretization: DiscretizationSpec,
    #[serde(default)]
    pub study: StudySpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    Identity {
        gamma0: f64,
        horizon: f64,
    },
    SeparableFlow {
        amplitude: f64,
        #[serde(default = "two_pi")]
        frequency: f64,
        gamma0: f64,
        horizon: f64,
    },
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BranchSpec {
    Constant { value: f64 },
    LinearInTime { value: f64, rate: f64 },
    Product { scale: f64, rate: f64, amplitude: f64, wavenumber: f64 },
    /// `α = 0`: the equation is elliptic on this side.
    Inactive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub branch1: BranchSpec,
    pub branch2: BranchSpec,
    /// Lower bound on the active branches; defaults to the smallest constant branch.
    #[serde(default)]
    pub alpha0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant { value: f64 },
    PerBranch { left: f64, right: f64 },
    Affine { value: f64, slope_x: f64, slope_t: f64 },
}

impl ScalarSpec {
    fn zero() -> Self {
        ScalarSpec::Constant { value: 0.0 }
    }

    fn one() -> Self {
        ScalarSpec::Constant { value: 1.0 }
    }

    fn build(self) -> ScalarField {
        match self {
            ScalarSpec::Constant { value } => ScalarField::Constant { value },
            ScalarSpec::PerBranch { left, right } => ScalarField::PerBranch { left, right },
            ScalarSpec::Affine { value, slope_x, slope_t } => ScalarField::Affine { value, slope_x, slope_t },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredSpec {
    pub c_a: f64,
    pub big_c_a: f64,
    #[serde(default)]
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    #[serde(default = "ScalarSpec::one")]
    pub diffusion: ScalarSpec,
    #[serde(default = "ScalarSpec::zero")]
    pub advection: ScalarSpec,
    #[serde(default = "ScalarSpec::zero")]
    pub reaction: ScalarSpec,
    #[serde(default = "d_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub declared: Option<DeclaredSpec>,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self {
            diffusion: ScalarSpec::one(),
            advection: ScalarSpec::zero(),
            reaction: ScalarSpec::zero(),
            boundary: d_boundary(),
            declared: None,
        }
    }
}

fn d_boundary() -> Boundary {
    Boundary::Dirichlet
}

/// Catalog fields by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { value: f64 },
    XLinear,
    SinLinear,
    SinExp { k: f64 },
    PolyQuad,
    SinCos,
    CubicMix,
    TimeSine,
    TimeLinear,
    TimeKink { center: f64 },
    BranchJump { left: f64, right: f64 },
    /// Flux-continuous kink that follows the scenario's interface.
    FluxJump { k1: f64, k2: f64 },
    Affine { c0: f64, cx: f64, ct: f64 },
    SinMode { k: f64, amplitude: f64 },
}

impl FieldSpec {
    pub fn build(self, motion: MotionMap) -> CatalogField {
        match self {
            FieldSpec::Constant { value } => CatalogField::Constant { value },
            FieldSpec::XLinear => CatalogField::XLinear,
            FieldSpec::SinLinear => CatalogField::SinLinear,
            FieldSpec::SinExp { k } => CatalogField::SinExp { k },
            FieldSpec::PolyQuad => CatalogField::PolyQuad,
            FieldSpec::SinCos => CatalogField::SinCos,
            FieldSpec::CubicMix => CatalogField::CubicMix,
            FieldSpec::TimeSine => CatalogField::TimeSine,
            FieldSpec::TimeLinear => CatalogField::TimeLinear,
            FieldSpec::TimeKink { center } => CatalogField::TimeKink { center },
            FieldSpec::BranchJump { left, right } => CatalogField::BranchJump { left, right },
            FieldSpec::FluxJump { k1, k2 } => CatalogField::FluxJump { k1, k2, motion },
            FieldSpec::Affine { c0, cx, ct } => CatalogField::Affine { c0, cx, ct },
            FieldSpec::SinMode { k, amplitude } => CatalogField::SinMode { k, amplitude },
        }
    }

    /// `name(key=value, ...)` with keys in declaration order.
    pub fn label(self) -> String {
        let value = serde_json::to_value(self).expect("field serializes");
        let map = value.as_object().expect("tagged enum");
        let name = map["name"].as_str().unwrap_or_default();
        let params: Vec<String> = map
            .iter()
            .filter(|(k, _)| k.as_str() != "name")
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if params.is_empty() {
            name.to_string()
        } else {
            format!("{name}({})", params.join(";"))
        }
    }

    /// True for fields with a kink in time.
    pub fn is_kinked(self) -> bool {
        matches!(self, FieldSpec::TimeKink { .. })
    }

    fn numbers(self) -> Vec<f64> {
        match self {
            FieldSpec::Constant { value } => vec![value],
            FieldSpec::SinExp { k } => vec![k],
            FieldSpec::TimeKink { center } => vec![center],
            FieldSpec::BranchJump { left, right } => vec![left, right],
            FieldSpec::FluxJump { k1, k2 } => vec![k1, k2],
            FieldSpec::Affine { c0, cx, ct } => vec![c0, cx, ct],
            FieldSpec::SinMode { k, amplitude } => vec![k, amplitude],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `g₁ = 0`, `g₂ = 0`.
    #[default]
    Zero,
    /// Data derived from an exact solution.
    Manufactured { solution: FieldSpec },
    /// `g₁` given by a source density, `g₂` by the trace of a field.
    Fields { source: FieldSpec, initial: FieldSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSpec {
    #[serde(default = "d_n")]
    pub n_x: usize,
    #[serde(default = "d_n")]
    pub n_t: usize,
    #[serde(default = "d_qx")]
    pub q_x: usize,
    #[serde(default = "d_qt")]
    pub q_t: usize,
    /// `(n_x, n_t)` levels for the inf-sup and convergence studies.
    #[serde(default = "d_levels")]
    pub levels: Vec<[usize; 2]>,
}

fn d_n() -> usize {
    16
}
fn d_qx() -> usize {
    4
}
fn d_qt() -> usize {
    3
}
fn d_levels() -> Vec<[usize; 2]> {
    vec![[4, 4], [8, 8], [16, 16], [32, 32]]
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self {
            n_x: d_n(),
            n_t: d_n(),
            q_x: d_qx(),
            q_t: d_qt(),
            levels: d_levels(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    #[serde(default = "d_href")]
    pub h_ref: f64,
    #[serde(default = "d_qx_norm")]
    pub q_x: usize,
    #[serde(default = "d_qt_norm")]
    pub q_t: usize,
    #[serde(default = "d_panels")]
    pub time_panels: usize,
    #[serde(default = "d_p")]
    pub p: f64,
}

fn d_href() -> f64 {
    1.0 / 512.0
}
fn d_qx_norm() -> usize {
    4
}
fn d_qt_norm() -> usize {
    8
}
fn d_panels() -> usize {
    32
}
fn d_p() -> f64 {
    2.0
}

impl Default for NormSpec {
    fn default() -> Self {
        Self {
            h_ref: d_href(),
            q_x: d_qx_norm(),
            q_t: d_qt_norm(),
            time_panels: d_panels(),
            p: d_p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    /// Fields for the calculus checks and the mollifier study.
    #[serde(default = "d_fields")]
    pub fields: Vec<FieldSpec>,
    /// Mollifier widths, strictly decreasing.
    #[serde(default = "d_eps")]
    pub eps: Vec<f64>,
    /// Random `(φ, w)` pairs per field.
    #[serde(default = "d_pairs")]
    pub pairs: usize,
    #[serde(default = "d_lambda")]
    pub lambda0: Vec<f64>,
    /// Reference cell size for the pairing checks, which need no dual norm.
    #[serde(default = "d_pairing_h")]
    pub pairing_h_ref: f64,
    /// Time step of the Reynolds residual check.
    #[serde(default = "d_dt")]
    pub reynolds_dt: f64,
    /// `(t₁, t₂)` windows of the integration by parts check.
    #[serde(default = "d_windows")]
    pub ibp_windows: Vec<[f64; 2]>,
    /// Gauss points `(space, time)` of the integration by parts check.
    #[serde(default = "d_ibp_orders")]
    pub ibp_orders: [usize; 2],
    /// Expected orders in `L²(Q)` and `L²(J,V)`; `null` expects exactness.
    #[serde(default = "d_orders")]
    pub expected_orders: Option<[f64; 2]>,
    #[serde(default = "d_order_tol")]
    pub order_tolerance: f64,
    #[serde(default)]
    pub norm: NormSpec,
}

fn d_fields() -> Vec<FieldSpec> {
    vec![
        FieldSpec::SinLinear,
        FieldSpec::SinExp { k: 2.0 },
        FieldSpec::PolyQuad,
        FieldSpec::SinCos,
        FieldSpec::CubicMix,
    ]
}
fn d_eps() -> Vec<f64> {
    vec![0.1, 0.05, 0.025, 0.0125]
}
fn d_pairs() -> usize {
    20
}
fn d_lambda() -> Vec<f64> {
    vec![1.0, -1.0]
}
fn d_pairing_h() -> f64 {
    1.0 / 128.0
}
fn d_dt() -> f64 {
    1e-4
}
fn d_windows() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [0.2, 0.7]]
}
fn d_ibp_orders() -> [usize; 2] {
    [8, 8]
}
fn d_orders() -> Option<[f64; 2]> {
    Some([2.0, 1.0])
}
fn d_order_tol() -> f64 {
    0.3
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            fields: d_fields(),
            eps: d_eps(),
            pairs: d_pairs(),
            pairing_h_ref: d_pairing_h(),
            lambda0: d_lambda(),
            reynolds_dt: d_dt(),
            ibp_windows: d_windows(),
            ibp_orders: d_ibp_orders(),
            expected_orders: d_orders(),
            order_tolerance: d_order_tol(),
            norm: NormSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "d_dir")]
    pub dir: String,
}

fn d_dir() -> String {
    "out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: d_dir() }
    }
}

fn invalid(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{key}: {message}"))
}

fn finite(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite (got {v})")))
    }
}

impl Scenario {
    /// Parse, fill defaults and validate.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        s.normalize();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The scenario with every default spelled out.
    pub fn normalized_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    fn normalize(&mut self) {
        if self.coefficient.alpha0.is_none() {
            let lowest = [self.coefficient.branch1, self.coefficient.branch2]
                .into_iter()
                .filter_map(|b| match b {
                    BranchSpec::Constant { value } => Some(value),
                    _ => None,
                })
                .fold(f64::INFINITY, f64::min);
            if lowest.is_finite() {
                self.coefficient.alpha0 = Some(lowest);
            }
        }
    }

    pub fn horizon(&self) -> f64 {
        match self.motion {
            MotionSpec::Identity { horizon, .. } | MotionSpec::SeparableFlow { horizon, .. } => horizon,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let (gamma0, horizon) = match self.motion {
            MotionSpec::Identity { gamma0, horizon } => (gamma0, horizon),
            MotionSpec::SeparableFlow {
                amplitude,
                frequency,
                gamma0,
                horizon,
            } => {
                finite("motion.amplitude", amplitude)?;
                finite("motion.frequency", frequency)?;
                (gamma0, horizon)
            }
        };
        if !(gamma0 > 0.0 && gamma0 < 1.0) {
            return Err(invalid("motion.gamma0", format!("must lie in (0, 1) (got {gamma0})")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("motion.horizon", format!("must be positive (got {horizon})")));
        }
        match self.coefficient.alpha0 {
            None => {
                return Err(invalid(
                    "coefficient.alpha0",
                    "required when no branch is a constant",
                ))
            }
            Some(a) if !(a > 0.0 && a.is_finite()) => {
                return Err(invalid("coefficient.alpha0", format!("must be positive (got {a})")))
            }
            _ => {}
        }
        for (key, b) in [("coefficient.branch1", self.coefficient.branch1), ("coefficient.branch2", self.coefficient.branch2)] {
            let nums: Vec<f64> = match b {
                BranchSpec::Constant { value } => vec![value],
                BranchSpec::LinearInTime { value, rate } => vec![value, rate],
                BranchSpec::Product {
                    scale,
                    rate,
                    amplitude,
                    wavenumber,
                } => vec![scale, rate, amplitude, wavenumber],
                BranchSpec::Inactive => Vec::new(),
            };
            for v in nums {
                finite(key, v)?;
            }
        }
        let d = &self.discretization;
        if d.n_x < 2 {
            return Err(invalid("discretization.n_x", format!("must be at least 2 (got {})", d.n_x)));
        }
        if d.n_t < 1 {
            return Err(invalid("discretization.n_t", "must be at least 1"));
        }
        for (key, q) in [("discretization.q_x", d.q_x), ("discretization.q_t", d.q_t)] {
            if !(1..=64).contains(&q) {
                return Err(invalid(key, format!("must lie in 1..=64 (got {q})")));
            }
        }
        if d.levels.is_empty() {
            return Err(invalid("discretization.levels", "must not be empty"));
        }
        if let Some(l) = d.levels.iter().find(|l| l[0] < 2 || l[1] < 1) {
            return Err(invalid("discretization.levels", format!("level {l:?} needs n_x >= 2 and n_t >= 1")));
        }
        let st = &self.study;
        if st.eps.is_empty() || st.eps.iter().any(|e| !(*e > 0.0)) || st.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("study.eps", "must be a non-empty, strictly decreasing list of positive widths"));
        }
        if let Some(e) = st.eps.iter().find(|&&e| e >= horizon / 4.0) {
            return Err(invalid("study.eps", format!("width {e} must be below T/4 = {}", horizon / 4.0)));
        }
        if st.pairs == 0 {
            return Err(invalid("study.pairs", "must be positive"));
        }
        if !(st.reynolds_dt > 0.0 && st.reynolds_dt < horizon) {
            return Err(invalid("study.reynolds_dt", format!("must lie in (0, T) (got {})", st.reynolds_dt)));
        }
        for w in &st.ibp_windows {
            if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= horizon) {
                return Err(invalid("study.ibp_windows", format!("window {w:?} must satisfy 0 <= t1 < t2 <= T")));
            }
        }
        for &l in &st.lambda0 {
            finite("study.lambda0", l)?;
        }
        if !(st.order_tolerance > 0.0) {
            return Err(invalid("study.order_tolerance", "must be positive"));
        }
        for f in st.fields.iter().chain(self.data_fields().iter()) {
            for v in f.numbers() {
                finite("field parameter", v)?;
            }
        }
        self.norm_context().validate().map_err(|e| invalid("study.norm", e))?;
        self.pairing_context().validate().map_err(|e| invalid("study.pairing_h_ref", e))?;
        self.ibp_context().validate().map_err(|e| invalid("study.ibp_orders", e))?;
        // surface coefficient and operator errors with their keys
        let motion = self.motion_map().map_err(|e| invalid("motion", e))?;
        let coeff = self.coefficient_with(motion).map_err(|e| invalid("coefficient", e))?;
        self.operator_with(coeff).map_err(|e| invalid("operator", e))?;
        Ok(())
    }

    fn data_fields(&self) -> Vec<FieldSpec> {
        match self.data {
            DataSpec::Zero => Vec::new(),
            DataSpec::Manufactured { solution } => vec![solution],
            DataSpec::Fields { source, initial } => vec![source, initial],
        }
    }

    pub fn motion_map(&self) -> eip_core::Result<MotionMap> {
        match self.motion {
            MotionSpec::Identity { gamma0, horizon } => MotionMap::identity(gamma0, horizon),
            MotionSpec::SeparableFlow {
                amplitude,
                frequency,
                gamma0,
                horizon,
            } => MotionMap::separable_flow(amplitude, frequency, gamma0, horizon),
        }
    }

    fn coefficient_with(&self, motion: MotionMap) -> eip_core::Result<PiecewiseCoefficient> {
        let branch = |b: BranchSpec| match b {
            BranchSpec::Constant { value } => (BranchFunction::Constant { value }, value != 0.0),
            BranchSpec::LinearInTime { value, rate } => (BranchFunction::LinearInTime { value, rate }, true),
            BranchSpec::Product {
                scale,
                rate,
                amplitude,
                wavenumber,
            } => (
                BranchFunction::Product {
                    scale,
                    rate,
                    amplitude,
                    wavenumber,
                },
                true,
            ),
            BranchSpec::Inactive => (BranchFunction::Constant { value: 0.0 }, false),
        };
        let (b1, a1) = branch(self.coefficient.branch1);
        let (b2, a2) = branch(self.coefficient.branch2);
        PiecewiseCoefficient::with_activity(b1, a1, b2, a2, self.coefficient.alpha0.unwrap_or(1.0), motion)
    }

    pub fn coefficient(&self) -> eip_core::Result<PiecewiseCoefficient> {
        self.coefficient_with(self.motion_map()?)
    }

    fn operator_with(&self, coeff: PiecewiseCoefficient) -> eip_core::Result<SpatialOperator> {
        let o = &self.operator;
        match o.declared {
            None => SpatialOperator::new(
                o.diffusion.build(),
                o.advection.build(),
                o.reaction.build(),
                coeff,
                o.boundary,
            ),
            Some(d) => SpatialOperator::with_declared(
                o.diffusion.build(),
                o.advection.build(),
                o.reaction.build(),
                coeff,
                o.boundary,
                DeclaredConstants {
                    c_a: d.c_a,
                    big_c_a: d.big_c_a,
                    lambda0: d.lambda0,
                },
            ),
        }
    }

    pub fn operator(&self) -> eip_core::Result<SpatialOperator> {
        self.operator_with(self.coefficient()?)
    }

    pub fn norm_context(&self) -> NormContext {
        let n = &self.study.norm;
        NormContext {
            h_ref: n.h_ref,
            q_x: n.q_x,
            q_t: n.q_t,
            time_panels: n.time_panels,
            boundary: self.operator.boundary,
            p: n.p,
        }
    }

    pub fn pairing_context(&self) -> NormContext {
        NormContext {
            h_ref: self.study.pairing_h_ref,
            ..self.norm_context()
        }
    }

    /// The norm context with the integration by parts orders.
    pub fn ibp_context(&self) -> NormContext {
        let [q_x, q_t] = self.study.ibp_orders;
        NormContext {
            q_x,
            q_t,
            ..self.norm_context()
        }
    }

    pub fn fields(&self) -> eip_core::Result<Vec<(FieldSpec, CatalogField)>> {
        let motion = self.motion_map()?;
        Ok(self.study.fields.iter().map(|f| (*f, f.build(motion))).collect())
    }

    /// The manufactured problem, if the data come from an exact solution.
    pub fn problem(&self) -> eip_core::Result<Option<Problem>> {
        match self.data {
            DataSpec::Manufactured { solution } => Ok(Some(Problem {
                name: self.name.clone(),
                op: self.operator()?,
                exact: solution.build(self.motion_map()?),
            })),
            _ => Ok(None),
        }
    }

    pub fn levels(&self) -> Vec<(usize, usize)> {
        self.discretization.levels.iter().map(|l| (l[0], l[1])).collect()
    }
}
