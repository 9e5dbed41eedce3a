//! Subcommand drivers: build the configured map, run the experiment and
//! assemble a [`RunReport`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::align::{self, delta_to_eps_sweep, procrustes_align, spearman};
use crate::ball::{
    binomial_sigma, bmo_norm_estimate, calibrate_tail_constant, deviations, evaluate_field,
    jn_tail, mean_oscillation, sample_ball, Ball, Centering, ScalarField,
};
use crate::bmo::{
    self, jacobian_claims_check, log_log_fit, quadratic_relation_check, sharpness_experiment,
    tail_check, theorem1_check, theorem2_check, theorem2_sweep, Calibration, TailRow,
    TheoremReport,
};
use crate::config::{BlockKind, ExperimentConfig, MapKind, ProfileKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{exp_antisymmetric, EuclideanMotion, Matrix, Vector};
use crate::maps::{
    approximation_lemma_check, compose_with_motion, default_scheme, distortion_estimate,
    AngleProfile, DifferentiableMap, IdentityMap, SlowTwist, TwistBlock,
};
use crate::pde::{self, antisymmetric_approximation, third_derivative_identity_check, TrigField};
use crate::report::{serialize_report, to_json, Cell, Check, Format, RunReport, Table};
use crate::rng;
use crate::tolerances;

pub const SUBCOMMANDS: [&str; 10] = [
    "distortion",
    "bmo1",
    "bmo2",
    "tail",
    "sharpness",
    "claims",
    "jn",
    "pde",
    "align",
    "sweep",
];

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CHECK_FAIL: i32 = 2;

pub type BoxedMap = Box<dyn DifferentiableMap>;

/// Rotation `exp(S)` with the strict upper entries of `S` uniform in
/// `(−π, π)`, drawn from the stream `(seed, 0)`.
pub fn random_rotation(dim: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut r = rng::task_rng(seed, 0);
    let mut s = Matrix::zeros(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let v = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    exp_antisymmetric(&s).expect("antisymmetric by construction")
}

fn translation(cfg: &ExperimentConfig) -> Vector {
    cfg.translation
        .as_ref()
        .map_or_else(|| Vector::zeros(cfg.dim), |t| Vector(t.clone()))
}

/// The configured map with nominal distortion `eps`.
pub fn build_map_with_eps(cfg: &ExperimentConfig, eps: f64) -> Result<BoxedMap> {
    let dim = cfg.dim;
    match cfg.map {
        MapKind::Identity => match &cfg.translation {
            None => Ok(Box::new(IdentityMap { dim })),
            Some(_) => Ok(Box::new(EuclideanMotion::new(
                Matrix::identity(dim),
                translation(cfg),
            )?)),
        },
        MapKind::Rotation => Ok(Box::new(EuclideanMotion::new(
            random_rotation(dim, cfg.rotation_seed),
            translation(cfg),
        )?)),
        MapKind::SlowTwist => {
            // Both profiles have sup t·|f'(t)| = ε/2.
            let profile = match cfg.profile {
                ProfileKind::Arctan => AngleProfile::Arctan { amplitude: eps },
                ProfileKind::Log => AngleProfile::Log {
                    amplitude: eps / 2.0,
                    clamp: cfg.clamp_t0,
                },
            };
            let theta = cfg
                .theta_seed
                .map_or_else(|| Matrix::identity(dim), |s| random_rotation(dim, s));
            let twist = match &cfg.blocks {
                None => SlowTwist::uniform(dim, profile, theta)?,
                Some(kinds) => SlowTwist::new(
                    kinds
                        .iter()
                        .map(|k| match k {
                            BlockKind::Rotation => TwistBlock::Rotation2(profile),
                            BlockKind::Identity => TwistBlock::Identity1,
                        })
                        .collect(),
                    theta,
                )?,
            };
            match &cfg.translation {
                None => Ok(Box::new(twist)),
                Some(_) => {
                    let post = EuclideanMotion::new(Matrix::identity(dim), translation(cfg))?;
                    Ok(Box::new(compose_with_motion(twist, None, Some(post))?))
                }
            }
        }
    }
}

pub fn build_map(cfg: &ExperimentConfig) -> Result<BoxedMap> {
    build_map_with_eps(cfg, cfg.eps)
}

fn ball(cfg: &ExperimentConfig) -> Result<Ball> {
    Ball::new(Vector(cfg.center.clone()), cfg.radius)
}

fn is_rigid(cfg: &ExperimentConfig) -> bool {
    cfg.map != MapKind::SlowTwist || cfg.eps == 0.0
}

fn matrix_value(m: &Matrix) -> Value {
    Value::Array((0..m.dim()).map(|i| vector_value(m.row(i))).collect())
}

fn vector_value(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| json!(x)).collect())
}

fn opt(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| json!(x))
}

struct Builder {
    summary: Map<String, Value>,
    table: Table,
    checks: Vec<Check>,
}

impl Builder {
    fn new(columns: &[&str]) -> Self {
        Builder {
            summary: Map::new(),
            table: Table::new(columns),
            checks: Vec::new(),
        }
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }

    /// Passes when `measured ≤ limit`.
    fn at_most(&mut self, name: &str, measured: f64, limit: f64) {
        self.checks.push(Check::new(
            name,
            measured <= limit,
            Some(measured),
            Some(limit),
        ));
    }

    fn at_least(&mut self, name: &str, measured: f64, limit: f64) {
        self.checks.push(Check::new(
            name,
            measured >= limit,
            Some(measured),
            Some(limit),
        ));
    }

    fn flag(&mut self, name: &str, passed: bool) {
        self.checks.push(Check::new(name, passed, None, None));
    }
}

const TAIL_COLUMNS: [&str; 6] = [
    "lambda",
    "threshold",
    "fraction",
    "bound",
    "sigma",
    "passed",
];

fn tail_cells(r: &TailRow) -> Vec<Cell> {
    vec![
        r.lambda.into(),
        r.threshold.into(),
        r.fraction.into(),
        r.bound.into(),
        r.sigma.into(),
        r.passed.into(),
    ]
}

fn tail_checks(b: &mut Builder, rows: &[TailRow]) {
    for r in rows {
        b.at_most(
            &format!("tail_lambda_{}", r.lambda),
            r.fraction,
            r.bound + 3.0 * r.sigma,
        );
    }
}

fn run_distortion(cfg: &ExperimentConfig) -> Result<Builder> {
    let map = build_map(cfg)?;
    let region = ball(cfg)?;
    let d = distortion_estimate(&map, &region, cfg.n_samples, cfg.seed)?;
    let approx = approximation_lemma_check(
        &map,
        d.eps_hat,
        cfg.n_samples,
        cfg.seed,
        tolerances::APPROXIMATION_RADIUS,
    )?;
    let mut columns = vec![
        "eps",
        "eps_hat",
        "n_samples",
        "approx_sup_err",
        "approx_ratio",
    ];
    let worst: Vec<String> = (0..cfg.dim).map(|i| format!("worst_x{i}")).collect();
    columns.extend(worst.iter().map(String::as_str));
    let mut b = Builder::new(&columns);
    let mut row = vec![
        cfg.eps.into(),
        d.eps_hat.into(),
        d.n_samples.into(),
        approx.sup_err.into(),
        approx.ratio.into(),
    ];
    row.extend(d.worst_point.as_slice().iter().map(|v| Cell::Num(*v)));
    b.table.push(row);
    b.put("eps_hat", json!(d.eps_hat));
    b.put("approximation_motion", motion_value(&approx.motion));
    if is_rigid(cfg) {
        b.at_most("distortion_exact", d.eps_hat, tolerances::EXACT);
        b.at_most("approximation_exact", approx.sup_err, tolerances::EXACT);
    } else {
        b.at_most("distortion_within_nominal", d.eps_hat, cfg.eps);
    }
    Ok(b)
}

fn motion_value(m: &EuclideanMotion) -> Value {
    json!({
        "rotation": matrix_value(m.rotation()),
        "translation": vector_value(m.translation().as_slice()),
        "proper": m.is_proper(),
    })
}

const THEOREM_COLUMNS: [&str; 8] = [
    "eps_hat",
    "mean_dev",
    "p4_dev",
    "max_dev",
    "mean_over_eps",
    "mean_over_sqrt_eps",
    "p4_over_sqrt_eps",
    "t_b_det",
];

fn theorem_cells(r: &TheoremReport) -> Vec<Cell> {
    vec![
        r.eps_hat.into(),
        r.mean_dev.into(),
        r.p4_dev.into(),
        r.max_dev.into(),
        r.ratios.mean_over_eps.into(),
        r.ratios.mean_over_sqrt_eps.into(),
        r.ratios.p4_over_sqrt_eps.into(),
        r.t_b.determinant().into(),
    ]
}

fn theorem_summary(b: &mut Builder, r: &TheoremReport) {
    b.put("eps_hat", json!(r.eps_hat));
    b.put("t_b", matrix_value(&r.t_b));
    b.put("mean_dev", json!(r.mean_dev));
    b.put("p4_dev", json!(r.p4_dev));
    b.put("max_dev", json!(r.max_dev));
    b.put("n", json!(r.n));
}

fn run_theorem(cfg: &ExperimentConfig, first: bool) -> Result<Builder> {
    let map = build_map(cfg)?;
    let region = ball(cfg)?;
    let r = if first {
        theorem1_check(&map, &region, cfg.n_samples, cfg.seed)?
    } else {
        theorem2_check(&map, &region, cfg.n_samples, cfg.seed)?
    };
    let mut b = Builder::new(&THEOREM_COLUMNS);
    b.table.push(theorem_cells(&r));
    theorem_summary(&mut b, &r);
    b.flag("mean_le_p4", r.mean_dev <= r.p4_dev);
    b.at_most(
        "t_b_orthogonal",
        r.t_b.orthogonality_defect(),
        tolerances::ORTHOGONALITY,
    );
    if is_rigid(cfg) {
        b.at_most("rigid_exact", r.max_dev, tolerances::EXACT);
    }
    Ok(b)
}

fn run_tail(cfg: &ExperimentConfig) -> Result<Builder> {
    let map = build_map(cfg)?;
    let r = tail_check(
        &map,
        &ball(cfg)?,
        cfg.n_samples,
        cfg.seed,
        &cfg.lambdas,
        cfg.calibration,
    )?;
    let mut b = Builder::new(&TAIL_COLUMNS);
    for row in &r.tail {
        b.table.push(tail_cells(row));
    }
    theorem_summary(&mut b, &r);
    b.put("calibration_c", opt(r.calibration_c));
    tail_checks(&mut b, &r.tail);
    Ok(b)
}

fn run_sharpness(cfg: &ExperimentConfig) -> Result<Builder> {
    let s = sharpness_experiment(cfg.eps, cfg.dim, cfg.n_samples, cfg.seed, &cfg.lambdas)?;
    let mut columns = TAIL_COLUMNS.to_vec();
    columns.push("rate");
    let mut b = Builder::new(&columns);
    b.put("eps", json!(s.eps));
    b.put("degenerate", json!(s.degenerate));
    b.put("kappa", opt(s.kappa));
    if let Some(r) = &s.report {
        for (row, rate) in r.tail.iter().zip(&s.rates) {
            let mut cells = tail_cells(row);
            cells.push((*rate).into());
            b.table.push(cells);
        }
        b.put("eps_hat", json!(r.eps_hat));
        b.put("calibration_c", opt(r.calibration_c));
        tail_checks(&mut b, &r.tail);
        if let Some(row) = r.tail.iter().find(|row| row.lambda == 2.0) {
            b.at_least("not_super_exponential", row.fraction, (-8.0f64).exp());
        }
    }
    Ok(b)
}

fn run_claims(cfg: &ExperimentConfig) -> Result<Builder> {
    let grid = if cfg.map == MapKind::SlowTwist {
        cfg.eps_grid.clone()
    } else {
        vec![cfg.eps]
    };
    let region = ball(cfg)?;
    let mut b = Builder::new(&["eps", "eps_hat", "diagonal", "off_diagonal", "diagonal_l2"]);
    let mut stats = Vec::new();
    for &eps in &grid {
        let map = build_map_with_eps(cfg, eps)?;
        let d = distortion_estimate(&map, &region, cfg.n_samples, cfg.seed)?;
        let a = approximation_lemma_check(
            &map,
            eps,
            cfg.n_samples,
            cfg.seed,
            tolerances::APPROXIMATION_RADIUS,
        )?;
        let normalized = compose_with_motion(map, None, Some(a.motion.inverse()))?;
        let c = jacobian_claims_check(&normalized, &region, cfg.n_samples, cfg.seed)?;
        b.table.push(vec![
            eps.into(),
            d.eps_hat.into(),
            c.diagonal.into(),
            c.off_diagonal.into(),
            c.diagonal_l2.into(),
        ]);
        stats.push(c);
    }
    if is_rigid(cfg) {
        let worst = stats
            .iter()
            .map(|c| c.diagonal.max(c.off_diagonal).max(c.diagonal_l2))
            .fold(0.0f64, f64::max);
        b.at_most("rigid_exact", worst, tolerances::EXACT);
        return Ok(b);
    }
    let (diag_slope, _) =
        log_log_fit(&grid, &stats.iter().map(|c| c.diagonal).collect::<Vec<_>>())?;
    let (off_slope, _) = log_log_fit(
        &grid,
        &stats.iter().map(|c| c.off_diagonal).collect::<Vec<_>>(),
    )?;
    let (l2_slope, _) = log_log_fit(
        &grid,
        &stats.iter().map(|c| c.diagonal_l2).collect::<Vec<_>>(),
    )?;
    b.put("diagonal_slope", json!(diag_slope));
    b.put("off_diagonal_slope", json!(off_slope));
    b.put("diagonal_l2_slope", json!(l2_slope));
    b.at_least("diagonal_slope", diag_slope, 1.0 - cfg.slope_tolerance);
    b.at_least("off_diagonal_slope", off_slope, 0.5 - cfg.slope_tolerance);
    b.at_least("diagonal_l2_slope", l2_slope, 0.5 - cfg.slope_tolerance);
    Ok(b)
}

/// Tail of `ln|x|` on the configured ball.
fn run_jn(cfg: &ExperimentConfig) -> Result<Builder> {
    let field = ScalarField(|x: &Vector| x.norm().ln());
    let region = ball(cfg)?;
    let scheme = default_scheme(cfg.dim);
    let sample = sample_ball(&region, cfg.n_samples, cfg.seed, scheme)?;
    let osc = mean_oscillation(&field, &sample, &Centering::Mean)?;
    // Norm estimate over the ball and four dyadic shrinkings of it.
    let family = (0..5)
        .map(|k| Ball::new(region.center().clone(), cfg.radius / f64::from(1u32 << k)))
        .collect::<Result<Vec<Ball>>>()?;
    let norm = bmo_norm_estimate(
        &field,
        &family,
        cfg.n_samples,
        rng::derive_seed(cfg.seed, 2),
        scheme,
    )?;
    let c = match cfg.calibration {
        Calibration::Fixed(c) => c,
        Calibration::AtLambdaOne => {
            let cal = sample_ball(
                &region,
                cfg.n_samples,
                rng::derive_seed(cfg.seed, 1),
                scheme,
            )?;
            let values = evaluate_field(&field, &cal)?;
            let h = crate::ball::mean_matrix(&values);
            calibrate_tail_constant(&deviations(&values, &h), norm, (-1.0f64).exp())
                .ok_or_else(|| invalid("ln|x| has zero oscillation on this ball"))?
        }
    };
    let tail = jn_tail(&field, &sample, &osc.h_b, norm, c, &cfg.lambdas)?;
    let mut b = Builder::new(&TAIL_COLUMNS);
    let rows: Vec<TailRow> = tail
        .iter()
        .map(|t| {
            let bound = (-t.lambda).exp();
            let sigma = binomial_sigma(bound, cfg.n_samples);
            TailRow {
                lambda: t.lambda,
                threshold: t.threshold,
                fraction: t.fraction,
                bound,
                sigma,
                passed: t.fraction <= bound + 3.0 * sigma,
            }
        })
        .collect();
    for r in &rows {
        b.table.push(tail_cells(r));
    }
    b.put("field", json!("ln|x|"));
    b.put("h_b", json!(osc.h_b[(0, 0)]));
    b.put("mean_dev", json!(osc.mean_dev));
    b.put("norm_estimate", json!(norm));
    b.put("calibration_c", json!(c));
    tail_checks(&mut b, &rows);
    Ok(b)
}

fn run_pde(cfg: &ExperimentConfig) -> Result<Builder> {
    let generated = match &cfg.field_file {
        Some(_) => None,
        None => Some(TrigField::random(
            &mut rng::task_rng(cfg.field_seed, 0),
            cfg.dim,
            cfg.field_degree,
            cfg.base_frequency,
        )),
    };
    let field = match (&cfg.field_file, &generated) {
        (Some(path), _) => pde::load(path)?,
        (None, Some(t)) => t.on_grid(cfg.half_width, cfg.grid_points)?,
        (None, None) => unreachable!(),
    };
    let approx = antisymmetric_approximation(&field)?;
    let antisymmetry = (&approx.s + &approx.s.transpose()).max_abs();
    let identity = third_derivative_identity_check(&field)?;
    let fine_points = 2 * field.points_per_axis() - 1;
    let refined = match &generated {
        Some(t) if fine_points.pow(field.dim() as u32) <= pde::MAX_NODES => Some(
            third_derivative_identity_check(&t.on_grid(field.half_width(), fine_points)?)?,
        ),
        _ => None,
    };
    let ratio = refined
        .filter(|_| identity > tolerances::EXACT)
        .map(|r| r / identity);
    let mut b = Builder::new(&[
        "points_per_axis",
        "spacing",
        "nodes_inside",
        "residual",
        "hypothesis_norm",
        "constant",
        "s_antisymmetry",
        "identity_residual",
        "identity_residual_refined",
        "identity_ratio",
    ]);
    b.table.push(vec![
        field.points_per_axis().into(),
        field.spacing().into(),
        approx.nodes_inside.into(),
        approx.residual.into(),
        approx.hypothesis_norm.into(),
        approx.constant.into(),
        antisymmetry.into(),
        identity.into(),
        refined.into(),
        ratio.into(),
    ]);
    b.put("s", matrix_value(&approx.s));
    b.put("exact_kernel", json!(approx.exact_kernel()));
    b.put("constant", opt(approx.constant));
    b.at_most("s_antisymmetric", antisymmetry, tolerances::ANTISYMMETRY);
    if approx.exact_kernel() {
        b.at_most("kernel_residual", approx.residual, tolerances::EXACT);
    }
    if let (Some(limit), Some(c)) = (cfg.pde_constant_limit, approx.constant) {
        b.at_most("constant_within_limit", c, limit);
    }
    if let Some(r) = ratio {
        b.checks.push(Check::new(
            "identity_order_two",
            (0.2..=0.3).contains(&r),
            Some(r),
            Some(0.25),
        ));
    }
    Ok(b)
}

fn run_align(cfg: &ExperimentConfig) -> Result<Builder> {
    match (&cfg.align_source, &cfg.align_target) {
        (Some(s), Some(t)) => run_align_files(cfg, s, t),
        _ => run_align_sweep(cfg),
    }
}

fn run_align_files(cfg: &ExperimentConfig, source: &Path, target: &Path) -> Result<Builder> {
    let y = align::load_points(source)?;
    let z = align::load_points(target)?;
    if y.len() != z.len() {
        return Err(invalid(format!(
            "point files pair by row but have {} and {} points",
            y.len(),
            z.len()
        )));
    }
    let r = procrustes_align(&y, &z, cfg.require_proper)?;
    let mut b = Builder::new(&["index", "error"]);
    for (i, (p, q)) in y.points().iter().zip(z.points()).enumerate() {
        b.table
            .push(vec![i.into(), q.distance(&r.motion.apply(p)).into()]);
    }
    b.put("motion", motion_value(&r.motion));
    b.put("delta_in", json!(r.delta_in));
    b.put("max_rel_err", json!(r.max_rel_err));
    b.put("rms_err", json!(r.rms_err));
    b.put(
        "warnings",
        Value::Array(r.warnings.iter().cloned().map(Value::from).collect()),
    );
    if cfg.require_proper {
        b.at_least("proper_motion", r.motion.rotation().determinant(), 0.0);
    }
    if let Some(limit) = cfg.max_rel_err_limit {
        b.at_most("max_rel_err_within_limit", r.max_rel_err, limit);
    }
    Ok(b)
}

fn run_align_sweep(cfg: &ExperimentConfig) -> Result<Builder> {
    let rows = delta_to_eps_sweep(cfg.k, cfg.dim, &cfg.delta_grid, cfg.trials, cfg.seed)?;
    let mut b = Builder::new(&["delta", "mean_max_rel_err", "max_max_rel_err", "trials"]);
    for r in &rows {
        b.table.push(vec![
            r.delta.into(),
            r.mean_max_rel_err.into(),
            r.max_max_rel_err.into(),
            r.trials.into(),
        ]);
    }
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.mean_max_rel_err).collect();
    let rho = spearman(&deltas, &means);
    b.put("k", json!(cfg.k));
    b.put("proper", json!(cfg.k <= cfg.dim));
    b.put("spearman", json!(rho));
    b.at_least("spearman", rho, cfg.spearman_min);
    if let Some(r) = rows.iter().find(|r| r.delta == 0.0) {
        b.at_most("congruent_exact", r.max_max_rel_err, tolerances::EXACT);
    }
    Ok(b)
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<Builder> {
    if cfg.map != MapKind::SlowTwist {
        return Err(invalid("sweep needs map = slow-twist"));
    }
    let region = ball(cfg)?;
    let s = theorem2_sweep(
        |eps| build_map_with_eps(cfg, eps),
        &cfg.eps_grid,
        &region,
        cfg.n_samples,
        cfg.seed,
    )?;
    let mut b = Builder::new(&[
        "eps",
        "eps_hat",
        "mean_dev",
        "p4_dev",
        "mean_over_eps",
        "mean_over_sqrt_eps",
        "p4_over_sqrt_eps",
        "fitted_slope",
        "fitted_constant",
    ]);
    for i in 0..s.eps_grid.len() {
        let eps = s.eps_grid[i];
        b.table.push(vec![
            eps.into(),
            s.eps_hats[i].into(),
            s.mean_devs[i].into(),
            s.p4_devs[i].into(),
            (s.mean_devs[i] / eps).into(),
            (s.mean_devs[i] / eps.sqrt()).into(),
            (s.p4_devs[i] / eps.sqrt()).into(),
            s.fitted_slope.into(),
            s.fitted_constant.into(),
        ]);
    }
    let spread = s.ratio_spread();
    b.put("fitted_slope", json!(s.fitted_slope));
    b.put("fitted_constant", json!(s.fitted_constant));
    b.put("ratio_spread", json!(spread));
    b.at_most(
        "slope_deviation",
        (s.fitted_slope - 1.0).abs(),
        cfg.slope_tolerance,
    );
    b.at_most("ratio_spread", spread, cfg.ratio_spread_limit);
    b.flag(
        "mean_le_p4",
        s.mean_devs.iter().zip(&s.p4_devs).all(|(m, p)| m <= p),
    );
    Ok(b)
}

/// Runs one subcommand and returns its report.
pub fn run_subcommand(name: &str, cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let b = match name {
        "distortion" => run_distortion(cfg)?,
        "bmo1" => run_theorem(cfg, true)?,
        "bmo2" => run_theorem(cfg, false)?,
        "tail" => run_tail(cfg)?,
        "sharpness" => run_sharpness(cfg)?,
        "claims" => run_claims(cfg)?,
        "jn" => run_jn(cfg)?,
        "pde" => run_pde(cfg)?,
        "align" => run_align(cfg)?,
        "sweep" => run_sweep(cfg)?,
        other => {
            return Err(invalid(format!(
                "unknown subcommand `{other}`; expected one of {}",
                SUBCOMMANDS.join(", ")
            )))
        }
    };
    Ok(RunReport {
        subcommand: name.to_string(),
        config: cfg.echo().to_vec(),
        summary: b.summary,
        table: b.table,
        checks: b.checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Sidecar path of the JSON manifest written next to a CSV report.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the report to the configured destination. CSV reports get a JSON
/// manifest sidecar carrying the configuration echo and the checks.
pub fn write_report(report: &RunReport, cfg: &ExperimentConfig) -> Result<()> {
    let bytes = serialize_report(report, cfg.format)?;
    match &cfg.output {
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
        Some(path) => {
            write_file(path, &bytes)?;
            if cfg.format == Format::Csv {
                write_file(&manifest_path(path), to_json(report).as_bytes())?;
            }
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

/// Full pipeline with exit-code mapping: 0 pass, 2 check failure, 1 input
/// or I/O error.
pub fn execute(name: &str, cfg: &ExperimentConfig) -> i32 {
    let report = match run_subcommand(name, cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    if let Err(e) = write_report(&report, cfg) {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "check failed: {} (measured {}, limit {})",
            c.name,
            c.measured.map_or("-".into(), |v| format!("{v:e}")),
            c.limit.map_or("-".into(), |v| format!("{v:e}")),
        );
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAIL
    }
}

/// Maps shipped by the harness, for the quadratic-relation audit.
pub fn shipped_maps(dim: usize, eps: f64) -> Result<Vec<(String, BoxedMap)>> {
    let mut maps: Vec<(String, BoxedMap)> = Vec::new();
    for (name, text) in [
        ("identity", "map = identity"),
        ("rotation", "map = rotation\nrotation_seed = 3"),
        ("slow-twist-arctan", "profile = arctan\ntheta_seed = 5"),
        ("slow-twist-log", "profile = log"),
    ] {
        let cfg = ExperimentConfig::from_text(text, &[format!("dim={dim}"), format!("eps={eps}")])?;
        maps.push((name.to_string(), build_map(&cfg)?));
    }
    maps.push(("log-twist".into(), Box::new(bmo::log_twist(dim, eps)?)));
    Ok(maps)
}

/// `max |residual − direct|` of the quadratic relation over `points`.
pub fn quadratic_discrepancy(map: &dyn DifferentiableMap, points: &[Vector]) -> Result<f64> {
    Ok(quadratic_relation_check(&map, points)?.discrepancy)
}
