//! Gauss–Legendre rules, composite and adaptive integration, and the
//! interface-fitted interval splitting shared by every space-time integral.

use std::sync::OnceLock;

/// Largest number of points for which rules are cached.
pub const MAX_CACHED_POINTS: usize = 64;

/// Distance below which an interface position is considered to coincide with
/// a partition point.
pub const COLLISION_TOL: f64 = 1e-14;

/// Offset applied to a colliding interface split.
pub const COLLISION_SHIFT: f64 = 1e-12;

/// An `n`-point Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rule with `n` points (`1 <= n <= MAX_CACHED_POINTS`).
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static RULES: OnceLock<Vec<GaussLegendre>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=MAX_CACHED_POINTS).map(GaussLegendre::new).collect());
    assert!(
        (1..=MAX_CACHED_POINTS).contains(&n),
        "Gauss rule with {n} points is not cached"
    );
    &rules[n - 1]
}

/// Composite Gauss rule with `panels` equal panels on `[a, b]`.
pub fn composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, points: usize, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gauss_legendre(points);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        total += rule.integrate(lo, hi, &mut f);
    }
    total
}

/// Composite nodes and weights, for callers that need to reuse evaluation
/// points across several integrands.
pub fn composite_nodes(a: f64, b: f64, panels: usize, points: usize) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let rule = gauss_legendre(points);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        out.extend(rule.mapped(lo, hi));
    }
    out
}

/// Composite nodes on `[a, b]` with additional breakpoints honoured: every
/// sub-interval between consecutive breakpoints gets its own panels.
pub fn composite_nodes_with_breaks(
    a: f64,
    b: f64,
    breaks: &[f64],
    panels: usize,
    points: usize,
) -> Vec<(f64, f64)> {
    let cuts = merged_breaks(a, b, breaks);
    let mut out = Vec::new();
    let width = b - a;
    for pair in cuts.windows(2) {
        // panels proportional to sub-interval length, at least one
        let share = ((pair[1] - pair[0]) / width * panels as f64).ceil().max(1.0) as usize;
        out.extend(composite_nodes(pair[0], pair[1], share, points));
    }
    out
}

/// `[a, breaks within (a, b)..., b]`, sorted and deduplicated.
pub fn merged_breaks(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a + COLLISION_TOL && x < b - COLLISION_TOL)
        .collect();
    inner.sort_by(f64::total_cmp);
    for x in inner {
        if x - *cuts.last().unwrap() > COLLISION_TOL {
            cuts.push(x);
        }
    }
    if b - *cuts.last().unwrap() > COLLISION_TOL {
        cuts.push(b);
    } else {
        *cuts.last_mut().unwrap() = b;
    }
    cuts
}

/// Adaptive Gauss–Legendre integration by bisection. Stops when a panel's
/// `points`-rule and the sum over its halves agree to `tol` (absolute,
/// scaled by panel width).
pub fn adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, tol: f64, mut f: F) -> f64 {
    const POINTS: usize = 15;
    const MAX_DEPTH: u32 = 40;
    let rule = gauss_legendre(POINTS);
    let whole = rule.integrate(a, b, &mut f);
    let width = b - a;
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let refined = left + right;
        let local_tol = tol * (hi - lo) / width;
        if (refined - est).abs() <= local_tol || depth >= MAX_DEPTH {
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

/// Where an interface lies relative to an interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalSplit {
    /// The whole interval lies left of the interface (side 1).
    Left,
    /// The whole interval lies right of the interface (side 2).
    Right,
    /// The interval is cut at the given point.
    Cut(f64),
}

/// Classify `[a, b]` against the interface position `gamma`. An interface
/// within [`COLLISION_TOL`] of an endpoint does not cut the interval.
pub fn classify(a: f64, b: f64, gamma: f64) -> IntervalSplit {
    if gamma <= a + COLLISION_TOL {
        IntervalSplit::Right
    } else if gamma >= b - COLLISION_TOL {
        IntervalSplit::Left
    } else {
        IntervalSplit::Cut(gamma)
    }
}

/// Interface cut of a partition point set: returns the cut position that
/// should be used when `gamma` nearly coincides with one of `points`.
/// The shift is applied toward the larger adjacent sub-interval.
pub fn split_with_collision(points: &[f64], gamma: f64) -> f64 {
    for (k, &p) in points.iter().enumerate() {
        if (p - gamma).abs() < COLLISION_TOL {
            let left_len = if k > 0 { p - points[k - 1] } else { 0.0 };
            let right_len = if k + 1 < points.len() { points[k + 1] - p } else { 0.0 };
            let shifted = if right_len >= left_len {
                p + COLLISION_SHIFT
            } else {
                p - COLLISION_SHIFT
            };
            log::debug!("interface {gamma:e} collides with partition point {p:e}; cut moved to {shifted:e}");
            return shifted;
        }
    }
    gamma
}

/// Integrate a side-aware integrand over `[a, b]` with an interface cut at
/// `gamma`: pieces left of the cut are evaluated with side 1 and pieces to
/// the right with side 2. Each piece uses `panels` panels of `points` points.
pub fn integrate_split<F: FnMut(f64, crate::Side) -> f64>(
    a: f64,
    b: f64,
    gamma: f64,
    panels: usize,
    points: usize,
    mut f: F,
) -> f64 {
    match classify(a, b, gamma) {
        IntervalSplit::Left => composite(a, b, panels, points, |x| f(x, crate::Side::One)),
        IntervalSplit::Right => composite(a, b, panels, points, |x| f(x, crate::Side::Two)),
        IntervalSplit::Cut(c) => {
            composite(a, c, panels, points, |x| f(x, crate::Side::One))
                + composite(c, b, panels, points, |x| f(x, crate::Side::Two))
        }
    }
}

/// Side-tagged quadrature nodes on `[a, b]` cut at `gamma`, honouring extra
/// breakpoints on each side.
pub fn split_nodes(
    a: f64,
    b: f64,
    gamma: f64,
    breaks: &[f64],
    panels: usize,
    points: usize,
) -> Vec<(f64, f64, crate::Side)> {
    let tag = |nodes: Vec<(f64, f64)>, side| nodes.into_iter().map(move |(x, w)| (x, w, side));
    match classify(a, b, gamma) {
        IntervalSplit::Left => tag(composite_nodes_with_breaks(a, b, breaks, panels, points), crate::Side::One).collect(),
        IntervalSplit::Right => {
            tag(composite_nodes_with_breaks(a, b, breaks, panels, points), crate::Side::Two).collect()
        }
        IntervalSplit::Cut(c) => {
            let c = split_with_collision(&merged_breaks(a, b, breaks), c);
            let mut out: Vec<_> =
                tag(composite_nodes_with_breaks(a, c, breaks, panels, points), crate::Side::One).collect();
            out.extend(tag(composite_nodes_with_breaks(c, b, breaks, panels, points), crate::Side::Two));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        for n in 1..=12 {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 33, 64] {
            let s: f64 = gauss_legendre(n).weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_flat_bump() {
        let v = adaptive(-1.0, 1.0, 1e-14, |t: f64| {
            if t.abs() < 1.0 {
                (t * t / (t * t - 1.0)).exp()
            } else {
                0.0
            }
        });
        // e * 0.4439938161680794 (classical bump integral)
        assert!((v - std::f64::consts::E * 0.443_993_816_168_079_4).abs() < 1e-12);
    }

    #[test]
    fn classify_respects_tolerance() {
        assert_eq!(classify(0.0, 1.0, 0.0), IntervalSplit::Right);
        assert_eq!(classify(0.0, 1.0, 1.0), IntervalSplit::Left);
        assert_eq!(classify(0.0, 1.0, 0.5), IntervalSplit::Cut(0.5));
        assert_eq!(classify(0.0, 1.0, 1e-15), IntervalSplit::Right);
    }

    #[test]
    fn collision_moves_toward_larger_neighbour() {
        let pts = [0.0, 0.1, 0.5];
        let c = split_with_collision(&pts, 0.1 + 1e-16);
        assert!(c > 0.1);
        let pts = [0.0, 0.4, 0.5];
        let c = split_with_collision(&pts, 0.4);
        assert!(c < 0.4);
    }

    #[test]
    fn split_integration_is_piecewise_exact() {
        // integrand 1 on the left, 3 on the right of 0.3
        let v = integrate_split(0.0, 1.0, 0.3, 1, 2, |_, s| match s {
            crate::Side::One => 1.0,
            crate::Side::Two => 3.0,
        });
        assert!((v - (0.3 + 3.0 * 0.7)).abs() < 1e-15);
    }
}
