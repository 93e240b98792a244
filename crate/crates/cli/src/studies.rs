//! One runner per subcommand.

use eip_core::calculus::{
    density_study, embedding_constant, embedding_ratio, fitted_order, ibp_residual, kernel_mass, pairing_set,
    prior_work_pairing,
};
use eip_core::discretization::{
    assemble_system, AssemblyOptions, DiscreteSystem, FieldSource, SpaceTimeMesh, Trace, Zero,
};
use eip_core::field::{CosineSeries, SineSeries};
use eip_core::linalg::mul_vec;
use eip_core::solver::{
    apriori_check, convergence_study, discrete_inf_sup, energy_residual, shift_equivalence, solve as solve_system,
    stability_study, svd_oracle, DENSE_CAP,
};
use eip_core::solver::benchmarks::Problem;
use eip_core::{Boundary, CatalogField, SpatialField, TimeBump};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DataSpec, FieldSpec, Scenario};
use crate::{num, Check, CliError, Report, RunOptions, Table};

pub const REYNOLDS_TOL: f64 = 1e-6;
/// Residuals below this are central-difference exact and are not fitted.
pub const REYNOLDS_FLOOR: f64 = 1e-10;
pub const REYNOLDS_ORDER_BAND: f64 = 0.3;
pub const CONSISTENCY_TOL: f64 = 1e-7;
pub const PRIOR_WORK_TOL: f64 = 1e-6;
pub const MATERIAL_TOL: f64 = 1e-6;
pub const IBP_TOL: f64 = 1e-8;
pub const KERNEL_MASS_TOL: f64 = 1e-10;
pub const KERNEL_MASS_WIDTHS: [f64; 2] = [0.1, 0.01];
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
pub const ENERGY_TOL: f64 = 1e-10;
pub const INFSUP_RATIO_MAX: f64 = 4.0;
pub const ORACLE_TOL: f64 = 1e-10;
pub const SHIFT_TOL: f64 = 1e-8;
pub const EXACT_TOL: f64 = 1e-10;

fn invalid(key: &str, message: &str) -> CliError {
    CliError::Validation(format!("{key}: {message}"))
}

fn problem_of(s: &Scenario, command: &str) -> Result<Problem, CliError> {
    s.problem()?
        .ok_or_else(|| invalid("data", &format!("`{command}` needs manufactured data")))
}

/// Ten fields in `V` for the embedding check.
pub fn embedding_fields(boundary: Boundary) -> Vec<FieldSpec> {
    let mut out = vec![
        FieldSpec::SinLinear,
        FieldSpec::SinExp { k: 1.0 },
        FieldSpec::SinExp { k: 2.0 },
        FieldSpec::SinExp { k: 3.0 },
        FieldSpec::PolyQuad,
        FieldSpec::SinCos,
        FieldSpec::CubicMix,
        FieldSpec::TimeKink { center: 0.5 },
        FieldSpec::SinMode { k: 2.0, amplitude: 1.5 },
        FieldSpec::FluxJump { k1: 1.0, k2: 2.0 },
    ];
    if boundary == Boundary::Neumann {
        out.truncate(7);
        out.extend([FieldSpec::XLinear, FieldSpec::TimeSine, FieldSpec::Affine { c0: 1.0, cx: 0.5, ct: 1.0 }]);
    }
    out
}

/// Random test pair: a bump inside `(0, T)` and a spatial field in `V`.
fn random_pair(rng: &mut ChaCha8Rng, horizon: f64, boundary: Boundary) -> (TimeBump, Box<dyn SpatialField>) {
    let radius = horizon * rng.random_range(0.1..0.2);
    let center = rng.random_range(radius + 0.05 * horizon..horizon - radius - 0.05 * horizon);
    let amplitude = rng.random_range(0.5..2.0);
    let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Box<dyn SpatialField> = match boundary {
        Boundary::Dirichlet => Box::new(SineSeries(coeffs)),
        Boundary::Neumann => Box::new(CosineSeries(coeffs)),
    };
    (TimeBump::new(center, radius, amplitude), w)
}

const CALCULUS_HEADER: [&str; 5] = ["group", "case", "index", "quantity", "value"];

fn calculus_report() -> Report {
    Report {
        table: Table::new(CALCULUS_HEADER.to_vec()),
        checks: Vec::new(),
    }
}

/// Reynolds transport, weighted-derivative pairings, integration by parts
/// and the trace embedding, all with the scenario's coefficient.
pub fn check_calculus(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let mut out = calculus_report();
    for part in [reynolds(s, opts)?, pairings(s, opts)?, ibp(s, opts)?, embedding(s, opts)?] {
        out.table.rows.extend(part.table.rows);
        out.checks.extend(part.checks);
    }
    Ok(out)
}

/// Reynolds residual per field at `100 dt`, `10 dt` and `dt`, maximized over
/// three interior times, with the fitted order in `dt`.
pub fn reynolds(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let motion = s.motion_map()?;
    let horizon = motion.horizon();
    let mut out = calculus_report();
    let dt = s.study.reynolds_dt;
    let steps = [100.0 * dt, 10.0 * dt, dt];
    let mut worst = 0.0f64;
    for (spec, field) in s.fields()? {
        let mut res = [0.0f64; 3];
        for (k, &h) in steps.iter().enumerate() {
            for frac in [0.25, 0.5, 0.75] {
                res[k] = res[k].max(motion.reynolds_residual(&field, frac * horizon, h)?);
            }
            out.table.push(vec!["reynolds".into(), spec.label(), k.to_string(), format!("dt={}", num(h)), num(res[k])]);
        }
        worst = worst.max(res[2]);
        if res[0] > REYNOLDS_FLOOR {
            let order = fitted_order(&steps, &res);
            out.table.push(vec!["reynolds".into(), spec.label(), "-".into(), "order".into(), num(order)]);
            out.checks.push(Check::near(format!("reynolds_order:{}", spec.label()), order, 2.0, REYNOLDS_ORDER_BAND));
        }
    }
    out.checks.push(Check::at_most("reynolds_max", worst, REYNOLDS_TOL * opts.tol_scale));
    Ok(out)
}

/// Weighted, classical, material and prior-work pairings over seeded random
/// `(φ, w)` pairs.
pub fn pairings(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let coeff = s.coefficient()?;
    let ctx = s.pairing_context();
    let horizon = s.horizon();
    let scale = opts.tol_scale;
    let mut out = calculus_report();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let constant = coeff.is_piecewise_constant();
    let (mut consistency, mut prior, mut material) = (0.0f64, 0.0f64, 0.0f64);
    for (spec, field) in s.fields()? {
        for k in 0..s.study.pairs {
            let (phi, w) = random_pair(&mut rng, horizon, ctx.boundary);
            let set = pairing_set(&field, &phi, w.as_ref(), &coeff, &ctx)?;
            consistency = consistency.max((set.weighted - set.classical).abs());
            material = material.max((set.material - set.weighted - set.convective).abs());
            let mut row = |q: &str, v: f64| {
                out.table.push(vec!["pairing".into(), spec.label(), k.to_string(), q.into(), num(v)])
            };
            row("weighted", set.weighted);
            row("classical", set.classical);
            row("material", set.material);
            row("convective", set.convective);
            if constant {
                let p = prior_work_pairing(&field, &phi, w.as_ref(), &coeff, &ctx)?;
                prior = prior.max((p - set.weighted).abs());
                row("prior_work", p);
            }
        }
    }
    out.checks.push(Check::at_most("consistency_max", consistency, CONSISTENCY_TOL * scale));
    if constant {
        out.checks.push(Check::at_most("prior_work_max", prior, PRIOR_WORK_TOL * scale));
    }
    out.checks.push(Check::at_most("material_max", material, MATERIAL_TOL * scale));
    Ok(out)
}

/// Integration by parts residual for consecutive field pairs on every window.
pub fn ibp(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let coeff = s.coefficient()?;
    let ctx = s.ibp_context();
    let fields = s.fields()?;
    let mut out = calculus_report();
    let mut worst = 0.0f64;
    for (i, (spec, u)) in fields.iter().enumerate() {
        let (zspec, z) = &fields[(i + 1) % fields.len()];
        for (k, w) in s.study.ibp_windows.iter().enumerate() {
            let r = ibp_residual(u, z, w[0], w[1], &coeff, &ctx)?;
            worst = worst.max(r);
            let case = format!("{}|{}", spec.label(), zspec.label());
            out.table.push(vec!["ibp".into(), case, k.to_string(), format!("[{},{}]", num(w[0]), num(w[1])), num(r)]);
        }
    }
    out.checks.push(Check::at_most("ibp_max", worst, IBP_TOL * opts.tol_scale));
    Ok(out)
}

/// Trace embedding ratio against its bound for ten fields, and the constant
/// on the reference parameters.
pub fn embedding(s: &Scenario, _opts: RunOptions) -> Result<Report, CliError> {
    let motion = s.motion_map()?;
    let coeff = s.coefficient()?;
    let ctx = s.norm_context();
    let mut out = calculus_report();
    let mut worst = 0.0f64;
    for spec in embedding_fields(ctx.boundary) {
        let rep = embedding_ratio(&spec.build(motion), &coeff, &ctx)?;
        worst = worst.max(rep.ratio / rep.bound);
        for (q, v) in [("ratio", rep.ratio), ("bound", rep.bound), ("trace", rep.max_trace_norm), ("graph", rep.graph_norm)] {
            out.table.push(vec!["embedding".into(), spec.label(), "-".into(), q.into(), num(v)]);
        }
    }
    out.checks.push(Check::at_most("embedding_ratio_over_bound", worst, 1.0));
    let reference = embedding_constant(2.0, 1.0, 2.0, 1.0, 1.0)?;
    out.table.push(vec!["embedding".into(), "reference".into(), "-".into(), "constant".into(), num(reference)]);
    out.checks.push(Check::exact("embedding_constant_reference", reference, 7f64.sqrt()));
    Ok(out)
}

/// Kernel normalization and the density study per field.
pub fn mollify(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let motion = s.motion_map()?;
    let ctx = s.norm_context();
    let mut table = Table::new(vec!["field", "eps", "error"]);
    let mut checks = Vec::new();
    for eps in KERNEL_MASS_WIDTHS {
        let mass = kernel_mass(eps)?;
        checks.push(Check::at_most(format!("kernel_mass:{}", num(eps)), (mass - 1.0).abs(), KERNEL_MASS_TOL * opts.tol_scale));
    }
    for (spec, field) in s.fields()? {
        let study = density_study(&field, &motion, &s.study.eps, &ctx)?;
        for r in &study.rows {
            table.push(vec![spec.label(), num(r.eps), num(r.error)]);
        }
        table.push(vec![spec.label(), "order".into(), num(study.order)]);
        checks.push(Check::holds(format!("density_decreasing:{}", spec.label()), study.decreasing));
        let name = format!("density_order:{}", spec.label());
        checks.push(if spec.is_kinked() {
            Check::at_least(name, study.order, 1.0)
        } else {
            Check::near(name, study.order, 2.0, s.study.order_tolerance)
        });
    }
    Ok(Report { table, checks })
}

fn assemble(s: &Scenario, mesh: &SpaceTimeMesh, opts: AssemblyOptions) -> Result<DiscreteSystem, CliError> {
    let op = s.operator()?;
    let motion = s.motion_map()?;
    Ok(match s.data {
        DataSpec::Zero => assemble_system(mesh, &op, &Zero, &Zero, opts)?,
        DataSpec::Manufactured { .. } => problem_of(s, "solve")?.assemble(mesh, opts)?,
        DataSpec::Fields { source, initial } => {
            let (g, u0): (CatalogField, CatalogField) = (source.build(motion), initial.build(motion));
            assemble_system(mesh, &op, &FieldSource(&g), &Trace(&u0), opts)?
        }
    })
}

/// Solve at `(n_x, n_t)` and write the nodal values.
pub fn solve(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let d = &s.discretization;
    let op = s.operator()?;
    let mesh = SpaceTimeMesh::build(d.n_x, d.n_t, &s.motion_map()?, op.boundary())?;
    let sys = assemble(
        s,
        &mesh,
        AssemblyOptions {
            q_x: d.q_x,
            q_t: d.q_t,
            ..AssemblyOptions::default()
        },
    )?;
    let sol = solve_system(&sys)?;
    let mut table = Table::new(vec!["level", "t", "node", "x", "u"]);
    let mut max_abs = 0.0f64;
    for n in 0..=mesh.n_t() {
        let t = mesh.times()[n];
        for (node, &x) in mesh.level(n).iter().enumerate() {
            let u = sol.nodal(n, node);
            max_abs = max_abs.max(u.abs());
            table.push(vec![n.to_string(), num(t), node.to_string(), num(x), num(u)]);
        }
    }
    let scale = opts.tol_scale;
    let residual: Vec<f64> = mul_vec(&sys.matrix, sol.coefficients());
    let gap = residual.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let size = sys.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut checks = vec![Check::at_most("relative_residual", gap / size, SOLVE_RESIDUAL_TOL * scale)];
    match s.data {
        DataSpec::Zero => checks.push(Check::exact("zero_data_max_abs", max_abs, 0.0)),
        DataSpec::Manufactured { .. } => {
            let problem = problem_of(s, "solve")?;
            checks.push(Check::at_most("energy_identity", energy_residual(&problem, &sol)?, ENERGY_TOL * scale));
        }
        DataSpec::Fields { .. } => {}
    }
    if sys.dim() <= DENSE_CAP && !matches!(s.data, DataSpec::Zero) {
        let c = discrete_inf_sup(&sys)?.value;
        checks.push(Check::holds("apriori_satisfied", apriori_check(&sol, &sys, c)?.satisfied));
    }
    Ok(Report { table, checks })
}

/// Discrete inf-sup constant and a priori check per level.
pub fn infsup(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let problem = problem_of(s, "infsup")?;
    let levels = s.levels();
    let report = stability_study(&problem, &levels)?;
    let mut table = Table::new(vec![
        "n_x",
        "n_t",
        "dim",
        "c_bh",
        "continuity",
        "method",
        "apriori_lhs",
        "apriori_rhs",
        "apriori_discrete_rhs",
        "apriori_satisfied",
    ]);
    for r in &report.rows {
        let method = serde_json::to_value(r.method).expect("method serializes");
        table.push(vec![
            r.n_x.to_string(),
            r.n_t.to_string(),
            r.dim.to_string(),
            num(r.c_bh),
            r.continuity.map(num).unwrap_or_default(),
            method.as_str().unwrap_or_default().to_string(),
            num(r.apriori_lhs),
            num(r.apriori_rhs),
            num(r.apriori_discrete_rhs),
            r.apriori_satisfied.to_string(),
        ]);
    }
    let mut checks = vec![
        Check::holds("infsup_positive", report.all_positive()),
        Check::holds("apriori_satisfied", report.all_satisfied()),
    ];
    if report.rows.len() > 1 {
        checks.push(Check::at_most("infsup_ratio", report.ratio(), INFSUP_RATIO_MAX));
    }
    let (n_x, n_t) = levels[0];
    let sys = problem.assemble(&problem.mesh(n_x, n_t)?, AssemblyOptions::default())?;
    if sys.dim() <= DENSE_CAP {
        let (m_x, m_y) = sys.norm_matrices()?;
        let oracle = svd_oracle(&sys.matrix, m_x, m_y)?;
        checks.push(Check::at_most(
            format!("svd_oracle_gap:{n_x}x{n_t}"),
            (oracle - report.rows[0].c_bh).abs(),
            ORACLE_TOL * opts.tol_scale,
        ));
    }
    Ok(Report { table, checks })
}

/// Errors over the scenario levels and fitted orders.
pub fn convergence(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let problem = problem_of(s, "convergence")?;
    let levels = s.levels();
    if levels.len() < 2 {
        return Err(invalid("discretization.levels", "convergence needs at least two levels"));
    }
    let conv = convergence_study(&problem, &levels)?;
    let mut table = Table::new(vec!["n_x", "n_t", "h", "l2", "l2v", "weighted_max"]);
    for r in &conv.rows {
        table.push(vec![r.n_x.to_string(), r.n_t.to_string(), num(r.h), num(r.l2), num(r.l2v), num(r.weighted_max)]);
    }
    table.push(vec![
        "order".into(),
        "-".into(),
        "-".into(),
        num(conv.order_l2),
        num(conv.order_l2v),
        num(conv.order_weighted_max),
    ]);
    let checks = match s.study.expected_orders {
        Some([p, q]) => vec![
            Check::near("order_l2", conv.order_l2, p, s.study.order_tolerance),
            Check::near("order_l2v", conv.order_l2v, q, s.study.order_tolerance),
        ],
        None => {
            let worst = |f: fn(&eip_core::solver::ConvergenceRow) -> f64| conv.rows.iter().map(f).fold(0.0, f64::max);
            vec![
                Check::at_most("exact_l2_max", worst(|r| r.l2), EXACT_TOL * opts.tol_scale),
                Check::at_most("exact_l2v_max", worst(|r| r.l2v), EXACT_TOL * opts.tol_scale),
            ]
        }
    };
    Ok(Report { table, checks })
}

/// `u_h` against `e^{λ₀t} û_h` for each configured `λ₀`.
pub fn shift(s: &Scenario, opts: RunOptions) -> Result<Report, CliError> {
    let problem = problem_of(s, "shift")?;
    let d = &s.discretization;
    let mut table = Table::new(vec!["lambda0", "max_pointwise_gap", "max_value"]);
    let mut checks = Vec::new();
    for &lambda in &s.study.lambda0 {
        let r = shift_equivalence(&problem, lambda, d.n_x, d.n_t)?;
        table.push(vec![num(r.lambda0), num(r.max_pointwise_gap), num(r.max_value)]);
        checks.push(Check::at_most(format!("shift_gap:{}", num(lambda)), r.max_pointwise_gap, SHIFT_TOL * opts.tol_scale));
    }
    Ok(Report { table, checks })
}
