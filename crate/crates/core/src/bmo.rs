//! Orthogonal approximation of Jacobians in mean and in measure.
//!
//! For a map `Φ` and a ball `B`, the harness picks `T_B ∈ O(D)` as the
//! polar factor of the averaged Jacobian, then measures the mean, the
//! fourth-moment root and the volume tail of `|Φ'(x) − T_B|` over a
//! uniform sample of `B`. The unknown constants of the estimates are
//! reported as empirical ratios against the measured distortion.

use rayon::prelude::*;

use crate::ball::{
    binomial_sigma, calibrate_tail_constant, deviations, mean_matrix, moment_summary, sample_ball,
    tail_fractions, Ball, BallSample,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{polar_orthogonal_factor, Matrix, Vector};
use crate::maps::{
    default_scheme, jacobians_at, pointwise_distortion, AngleProfile, DifferentiableMap, SlowTwist,
};
use crate::rng;

/// Default λ values of the tail experiments.
pub const DEFAULT_LAMBDAS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];

/// Clamp radius of the log profile used by the sharpness experiment.
pub const SHARPNESS_CLAMP: f64 = 0.1;

/// Headline ratios; `None` when the measured distortion is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Ratios {
    pub mean_over_eps: Option<f64>,
    pub mean_over_sqrt_eps: Option<f64>,
    pub p4_over_sqrt_eps: Option<f64>,
}

/// One λ of a tail check against the bound `exp(−λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub lambda: f64,
    pub threshold: f64,
    pub fraction: f64,
    pub bound: f64,
    /// Binomial standard deviation of a fraction whose true value is the bound.
    pub sigma: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub eps_hat: f64,
    pub t_b: Matrix,
    pub mean_dev: f64,
    pub p4_dev: f64,
    pub max_dev: f64,
    pub tail: Vec<TailRow>,
    pub calibration_c: Option<f64>,
    pub ratios: Ratios,
    pub n: usize,
    pub seed: u64,
}

impl TheoremReport {
    pub fn tail_passed(&self) -> bool {
        self.tail.iter().all(|r| r.passed)
    }
}

/// Jacobian data of a map over one sampled ball.
struct JacobianSample {
    jacobians: Vec<Matrix>,
    eps_hat: f64,
}

fn jacobian_sample<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: &BallSample,
) -> Result<JacobianSample> {
    if sample.ball().dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: sample.ball().dim(),
        });
    }
    let jacobians = jacobians_at(map, sample.points())?;
    let eps_hat = jacobians
        .par_iter()
        .map(pointwise_distortion)
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(JacobianSample { jacobians, eps_hat })
}

fn sample_for<M: DifferentiableMap + ?Sized>(
    map: &M,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<BallSample> {
    if ball.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: ball.dim(),
        });
    }
    sample_ball(ball, n, seed, default_scheme(map.dim()))
}

fn orthogonal_fit(jacobians: &[Matrix]) -> Result<Matrix> {
    polar_orthogonal_factor(&mean_matrix(jacobians)).map_err(|e| match e {
        Error::Degenerate {
            smallest_singular_value,
            ..
        } => Error::Degenerate {
            context: "mean Jacobian is rank deficient; the map is far from rigid on this ball"
                .into(),
            smallest_singular_value,
        },
        other => other,
    })
}

/// `T = polar(mean_B Φ')`.
pub fn best_orthogonal_t<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: &BallSample,
) -> Result<Matrix> {
    let js = jacobians_at(map, sample.points())?;
    orthogonal_fit(&js)
}

fn ratios(mean_dev: f64, p4_dev: f64, eps: f64) -> Ratios {
    if eps > 0.0 {
        Ratios {
            mean_over_eps: Some(mean_dev / eps),
            mean_over_sqrt_eps: Some(mean_dev / eps.sqrt()),
            p4_over_sqrt_eps: Some(p4_dev / eps.sqrt()),
        }
    } else {
        Ratios::default()
    }
}

fn report_from(js: &JacobianSample, n: usize, seed: u64) -> Result<(TheoremReport, Vec<f64>)> {
    let t_b = orthogonal_fit(&js.jacobians)?;
    let devs = deviations(&js.jacobians, &t_b);
    let (mean_dev, p4_dev, max_dev) = moment_summary(&devs);
    let report = TheoremReport {
        eps_hat: js.eps_hat,
        t_b,
        mean_dev,
        p4_dev,
        max_dev,
        tail: Vec::new(),
        calibration_c: None,
        ratios: ratios(mean_dev, p4_dev, js.eps_hat),
        n,
        seed,
    };
    Ok((report, devs))
}

/// Mean deviation of `Φ'` from `T_B`; the ratio `mean_dev/√ε` is the
/// empirical constant of the square-root estimate.
pub fn theorem1_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<TheoremReport> {
    let sample = sample_for(map, ball, n, seed)?;
    let js = jacobian_sample(map, &sample)?;
    Ok(report_from(&js, n, seed)?.0)
}

/// Same measurement as [`theorem1_check`]; the headline ratio is
/// `mean_dev/ε`, the empirical constant of the linear estimate.
pub fn theorem2_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<TheoremReport> {
    theorem1_check(map, ball, n, seed)
}

/// Residual of the quadratic Jacobian relation, computed both from
/// `Ω = Φ − id` and directly from `Φ'ᵀΦ' − I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticRelation {
    /// `max |∂_iΩ_j + ∂_jΩ_i + Σ_l ∂_iΩ_l·∂_jΩ_l|`.
    pub residual: f64,
    /// `max |(Φ'ᵀΦ' − I)_ij|`.
    pub direct: f64,
    /// Largest pointwise entry difference between the two routes.
    pub discrepancy: f64,
}

pub fn quadratic_relation_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    points: &[Vector],
) -> Result<QuadraticRelation> {
    if points.is_empty() {
        return Err(invalid("quadratic relation check needs at least one point"));
    }
    let js = jacobians_at(map, points)?;
    let dim = map.dim();
    let per_point: Vec<(f64, f64, f64)> = js
        .par_iter()
        .map(|j| {
            // grad[i][j] = ∂Ω_i/∂x_j
            let grad = j - &Matrix::identity(dim);
            let gram = &(&j.transpose() * j) - &Matrix::identity(dim);
            let (mut res, mut dir, mut disc) = (0.0f64, 0.0f64, 0.0f64);
            for a in 0..dim {
                for b in 0..dim {
                    let quad: f64 = (0..dim).map(|l| grad[(l, a)] * grad[(l, b)]).sum();
                    let e = grad[(b, a)] + grad[(a, b)] + quad;
                    res = res.max(e.abs());
                    dir = dir.max(gram[(a, b)].abs());
                    disc = disc.max((e - gram[(a, b)]).abs());
                }
            }
            (res, dir, disc)
        })
        .collect();
    Ok(per_point.into_iter().fold(
        QuadraticRelation {
            residual: 0.0,
            direct: 0.0,
            discrepancy: 0.0,
        },
        |acc, (r, d, x)| QuadraticRelation {
            residual: acc.residual.max(r),
            direct: acc.direct.max(d),
            discrepancy: acc.discrepancy.max(x),
        },
    ))
}

/// How the constant `C` in the tail threshold `C·λ·ε` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Calibration {
    Fixed(f64),
    /// Smallest `C` with tail fraction at `λ = 1` at most `e^{-1}`, fitted
    /// on an independent sample of the same ball.
    AtLambdaOne,
}

fn tail_rows(devs: &[f64], eps: f64, c: f64, lambdas: &[f64]) -> Result<Vec<TailRow>> {
    let n = devs.len();
    Ok(tail_fractions(devs, eps, c, lambdas)?
        .into_iter()
        .map(|t| {
            let bound = (-t.lambda).exp();
            let sigma = binomial_sigma(bound, n);
            TailRow {
                lambda: t.lambda,
                threshold: t.threshold,
                fraction: t.fraction,
                bound,
                sigma,
                passed: t.fraction <= bound + 3.0 * sigma,
            }
        })
        .collect())
}

/// Volume fractions of `{x ∈ B : |Φ'(x) − T_B| > C·λ·ε}` against `exp(−λ)`.
pub fn tail_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    ball: &Ball,
    n: usize,
    seed: u64,
    lambdas: &[f64],
    calibration: Calibration,
) -> Result<TheoremReport> {
    if lambdas.is_empty() {
        return Err(invalid("tail check needs at least one λ"));
    }
    let sample = sample_for(map, ball, n, seed)?;
    let js = jacobian_sample(map, &sample)?;
    let (mut report, devs) = report_from(&js, n, seed)?;
    if js.eps_hat == 0.0 {
        // Rigid map: every deviation is zero up to rounding.
        report.tail = lambdas
            .iter()
            .map(|&lambda| {
                let fraction = devs
                    .iter()
                    .filter(|d| **d > crate::tolerances::EXACT)
                    .count() as f64
                    / n as f64;
                let bound = (-lambda).exp();
                let sigma = binomial_sigma(bound, n);
                TailRow {
                    lambda,
                    threshold: crate::tolerances::EXACT,
                    fraction,
                    bound,
                    sigma,
                    passed: fraction <= bound + 3.0 * sigma,
                }
            })
            .collect();
        return Ok(report);
    }
    let c = match calibration {
        Calibration::Fixed(c) => c,
        Calibration::AtLambdaOne => {
            let cal_sample = sample_for(map, ball, n, rng::derive_seed(seed, 1))?;
            let cal = jacobian_sample(map, &cal_sample)?;
            let cal_t = orthogonal_fit(&cal.jacobians)?;
            let cal_devs = deviations(&cal.jacobians, &cal_t);
            calibrate_tail_constant(&cal_devs, cal.eps_hat, (-1.0f64).exp())
                .ok_or_else(|| invalid("calibration sample has zero distortion"))?
        }
    };
    report.tail = tail_rows(&devs, js.eps_hat, c, lambdas)?;
    report.calibration_c = Some(c);
    Ok(report)
}

/// Slow twist with the log profile whose `t·f'` equals `eps/2` beyond the
/// clamp radius.
pub fn log_twist(dim: usize, eps: f64) -> Result<SlowTwist> {
    SlowTwist::uniform(
        dim,
        AngleProfile::Log {
            amplitude: eps / 2.0,
            clamp: SHARPNESS_CLAMP,
        },
        Matrix::identity(dim),
    )
}

#[derive(Clone, Debug)]
pub struct SharpnessReport {
    pub eps: f64,
    /// Set when `eps = 0`: the twist is the identity and no rate exists.
    pub degenerate: bool,
    pub report: Option<TheoremReport>,
    /// `−ln(fraction)/λ` for each λ; `None` when the fraction is zero.
    pub rates: Vec<Option<f64>>,
    /// Smallest `κ` with `fraction(λ) ≥ exp(−κλ)` for every λ. `None` when
    /// some fraction vanishes at this sample size.
    pub kappa: Option<f64>,
}

/// Tail experiment on the log-profile slow twist in `B(0, 1)`.
pub fn sharpness_experiment(
    eps: f64,
    dim: usize,
    n: usize,
    seed: u64,
    lambdas: &[f64],
) -> Result<SharpnessReport> {
    if !(eps.is_finite() && (0.0..=0.3).contains(&eps)) {
        return Err(invalid(format!(
            "sharpness experiment needs ε in (0, 0.3], got {eps}"
        )));
    }
    if dim < 2 {
        return Err(invalid("sharpness experiment needs D ≥ 2"));
    }
    if eps == 0.0 {
        return Ok(SharpnessReport {
            eps,
            degenerate: true,
            report: None,
            rates: Vec::new(),
            kappa: None,
        });
    }
    let twist = log_twist(dim, eps)?;
    let report = tail_check(
        &twist,
        &Ball::unit(dim),
        n,
        seed,
        lambdas,
        Calibration::AtLambdaOne,
    )?;
    let rates: Vec<Option<f64>> = report
        .tail
        .iter()
        .map(|r| (r.fraction > 0.0).then(|| -r.fraction.ln() / r.lambda))
        .collect();
    let kappa = rates
        .iter()
        .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)));
    Ok(SharpnessReport {
        eps,
        degenerate: false,
        report: Some(report),
        rates,
        kappa,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClaimStats {
    /// `max_i mean |∂ψ_i/∂x_i − 1|`.
    pub diagonal: f64,
    /// `max_{i≠j} mean |∂ψ_i/∂x_j|`.
    pub off_diagonal: f64,
    /// `max_i (mean (∂ψ_i/∂x_i − 1)²)^{1/2}`.
    pub diagonal_l2: f64,
}

/// Entrywise Jacobian statistics of a map already normalised so that its
/// best Euclidean approximation is the identity.
pub fn jacobian_claims_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<ClaimStats> {
    let sample = sample_for(map, ball, n, seed)?;
    let js = jacobians_at(map, sample.points())?;
    let dim = map.dim();
    let nf = js.len() as f64;
    let mut diag_abs = vec![0.0; dim];
    let mut diag_sq = vec![0.0; dim];
    let mut off = vec![0.0; dim * dim];
    for j in &js {
        for a in 0..dim {
            let d = j[(a, a)] - 1.0;
            diag_abs[a] += d.abs();
            diag_sq[a] += d * d;
            for b in 0..dim {
                if a != b {
                    off[a * dim + b] += j[(a, b)].abs();
                }
            }
        }
    }
    Ok(ClaimStats {
        diagonal: diag_abs.iter().fold(0.0f64, |m, v| m.max(v / nf)),
        off_diagonal: off.iter().fold(0.0f64, |m, v| m.max(v / nf)),
        diagonal_l2: diag_sq.iter().fold(0.0f64, |m, v| m.max((v / nf).sqrt())),
    })
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub eps_grid: Vec<f64>,
    pub eps_hats: Vec<f64>,
    pub mean_devs: Vec<f64>,
    pub p4_devs: Vec<f64>,
    /// Least-squares slope of `ln mean_dev` against `ln ε`.
    pub fitted_slope: f64,
    /// `exp(intercept)` of the same fit.
    pub fitted_constant: f64,
}

impl SweepResult {
    /// `max(mean_dev/ε) / min(mean_dev/ε)` over the grid.
    pub fn ratio_spread(&self) -> f64 {
        let r: Vec<f64> = self
            .eps_grid
            .iter()
            .zip(&self.mean_devs)
            .map(|(e, m)| m / e)
            .collect();
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Least-squares fit `ln y = slope·ln x + ln c`; returns `(slope, c)`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("log-log fit needs at least two aligned points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("log-log fit needs at least two distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, (my - slope * mx).exp()))
}

/// Runs [`theorem2_check`] for each `ε` on maps built by `make_map`, with
/// the same sample (common random numbers) at every grid point.
pub fn theorem2_sweep<M, F>(
    make_map: F,
    eps_grid: &[f64],
    ball: &Ball,
    n: usize,
    seed: u64,
) -> Result<SweepResult>
where
    M: DifferentiableMap,
    F: Fn(f64) -> Result<M>,
{
    let mut eps_hats = Vec::with_capacity(eps_grid.len());
    let mut mean_devs = Vec::with_capacity(eps_grid.len());
    let mut p4_devs = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let map = make_map(eps)?;
        let r = theorem2_check(&map, ball, n, seed)?;
        eps_hats.push(r.eps_hat);
        mean_devs.push(r.mean_dev);
        p4_devs.push(r.p4_dev);
    }
    let (fitted_slope, fitted_constant) = log_log_fit(eps_grid, &mean_devs)?;
    Ok(SweepResult {
        eps_grid: eps_grid.to_vec(),
        eps_hats,
        mean_devs,
        p4_devs,
        fitted_slope,
        fitted_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{antisymmetric_part, exp_antisymmetric, EuclideanMotion};
    use crate::maps::{compose_with_motion, IdentityMap};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng, dim: usize) -> Matrix {
        let data: Vec<f64> = (0..dim * dim)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        exp_antisymmetric(&antisymmetric_part(&Matrix::from_row_slice(dim, &data))).unwrap()
    }

    fn arctan_twist(dim: usize, eps: f64, theta: Matrix) -> SlowTwist {
        SlowTwist::uniform(dim, AngleProfile::Arctan { amplitude: eps }, theta).unwrap()
    }

    #[test]
    fn identity_has_zero_deviation() {
        let r = theorem1_check(&IdentityMap { dim: 3 }, &Ball::unit(3), 1000, 1).unwrap();
        assert_eq!(r.mean_dev, 0.0);
        assert_eq!(r.t_b, Matrix::identity(3));
        assert_eq!(r.ratios, Ratios::default());
    }

    #[test]
    fn rotation_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_rotation(&mut rng, 4);
        let m = EuclideanMotion::new(q.clone(), Vector(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let r = theorem2_check(&m, &Ball::centered(4, 2.0).unwrap(), 1000, 1).unwrap();
        assert!(r.mean_dev <= 1e-10);
        assert!((&r.t_b - &q).frobenius() <= 1e-12);
    }

    #[test]
    fn polar_choice_close_to_l1_optimum_in_2d() {
        let tw = arctan_twist(2, 0.1, Matrix::identity(2));
        let sample = sample_ball(&Ball::unit(2), 20_000, 3, default_scheme(2)).unwrap();
        let js = jacobians_at(&tw, sample.points()).unwrap();
        let t = best_orthogonal_t(&tw, &sample).unwrap();
        let objective =
            |q: &Matrix| js.iter().map(|j| (j - q).frobenius()).sum::<f64>() / js.len() as f64;
        let ours = objective(&t);
        let mut best = f64::INFINITY;
        for k in 0..10_000 {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 10_000.0;
            let (s, c) = a.sin_cos();
            best = best
                .min(objective(&Matrix::from_row_slice(2, &[c, -s, s, c])))
                .min(objective(&Matrix::from_row_slice(2, &[c, s, s, -c])));
        }
        assert!(ours <= 1.02 * best, "{ours} vs {best}");
    }

    #[test]
    fn projection_property_of_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tw = arctan_twist(3, 0.1, random_rotation(&mut rng, 3));
        let sample = sample_ball(&Ball::unit(3), 20_000, 3, default_scheme(3)).unwrap();
        let js = jacobians_at(&tw, sample.points()).unwrap();
        let t = best_orthogonal_t(&tw, &sample).unwrap();
        let r = theorem1_check(&tw, &Ball::unit(3), 20_000, 3).unwrap();
        assert!((&mean_matrix(&js) - &t).frobenius() <= r.mean_dev);
        assert!(r.t_b.is_orthogonal());
    }

    #[test]
    fn motion_equivariance_of_reports() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tw = arctan_twist(3, 0.05, random_rotation(&mut rng, 3));
        let a = EuclideanMotion::new(random_rotation(&mut rng, 3), Vector(vec![0.5, 0.0, -1.0]))
            .unwrap();
        let normalized = compose_with_motion(&tw, None, Some(a.inverse())).unwrap();
        let ball = Ball::unit(3);
        let lambdas = [1.0, 2.0];
        let r1 = tail_check(&tw, &ball, 20_000, 4, &lambdas, Calibration::Fixed(0.5)).unwrap();
        let r2 = tail_check(
            &normalized,
            &ball,
            20_000,
            4,
            &lambdas,
            Calibration::Fixed(0.5),
        )
        .unwrap();
        assert!((r1.mean_dev - r2.mean_dev).abs() < 1e-10);
        assert!((r1.p4_dev - r2.p4_dev).abs() < 1e-10);
        for (x, y) in r1.tail.iter().zip(&r2.tail) {
            assert!((x.fraction - y.fraction).abs() <= 1.0 / 20_000.0);
        }
        let conjugated = &a.rotation().transpose() * &r1.t_b;
        assert!((&conjugated - &r2.t_b).frobenius() < 1e-10);
    }

    #[test]
    fn quadratic_relation_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vector> = (0..200)
            .map(|_| Vector((0..3).map(|_| rng.random_range(-3.0..3.0)).collect()))
            .collect();
        let id = quadratic_relation_check(&IdentityMap { dim: 3 }, &pts).unwrap();
        assert_eq!(id.residual, 0.0);
        let q = EuclideanMotion::new(random_rotation(&mut rng, 3), Vector::zeros(3)).unwrap();
        assert!(quadratic_relation_check(&q, &pts).unwrap().residual <= 1e-12);

        let tw = arctan_twist(3, 0.1, random_rotation(&mut rng, 3));
        let rel = quadratic_relation_check(&tw, &pts).unwrap();
        assert!(rel.discrepancy <= 1e-12);
        let eps_hat = crate::maps::distortion_on_points(&tw, &pts)
            .unwrap()
            .eps_hat;
        assert!(rel.residual <= eps_hat * (1.0 + 1e-6));
    }

    #[test]
    fn rigid_maps_have_empty_tails() {
        let ball = Ball::unit(2);
        let r = tail_check(
            &IdentityMap { dim: 2 },
            &ball,
            1000,
            1,
            &DEFAULT_LAMBDAS,
            Calibration::AtLambdaOne,
        )
        .unwrap();
        assert!(r.tail.iter().all(|t| t.fraction == 0.0 && t.passed));
        let m = EuclideanMotion::new(
            Matrix::from_row_slice(2, &[0.0, -1.0, 1.0, 0.0]),
            Vector(vec![3.0, 1.0]),
        )
        .unwrap();
        let r = tail_check(
            &m,
            &ball,
            1000,
            1,
            &DEFAULT_LAMBDAS,
            Calibration::Fixed(1.0),
        )
        .unwrap();
        assert!(r.tail.iter().all(|t| t.fraction == 0.0));
    }

    #[test]
    fn mean_recoverable_from_tail() {
        // mean_dev = ∫₀^∞ P(|Φ' − T| > t) dt, evaluated on the same sample
        // by the trapezoid rule over thresholds k·dt.
        let tw = log_twist(2, 0.1).unwrap();
        let n = 20_000;
        let r = theorem1_check(&tw, &Ball::unit(2), n, 5).unwrap();
        let sample = sample_ball(&Ball::unit(2), n, 5, default_scheme(2)).unwrap();
        let devs = deviations(&jacobians_at(&tw, sample.points()).unwrap(), &r.t_b);
        let steps = 4000;
        let dt = r.max_dev / steps as f64;
        let ks: Vec<f64> = (1..=steps).map(|k| k as f64).collect();
        let tail = tail_fractions(&devs, dt, 1.0, &ks).unwrap();
        let inner: f64 = tail[..steps - 1].iter().map(|t| t.fraction).sum();
        let integral = dt * (0.5 + inner + 0.5 * tail[steps - 1].fraction);
        assert!(
            (integral - r.mean_dev).abs() < 1e-3 * r.mean_dev,
            "{integral} vs {}",
            r.mean_dev
        );
    }

    #[test]
    fn claims_for_identity_and_unnormalized_rotation() {
        let ball = Ball::unit(2);
        let id = jacobian_claims_check(&IdentityMap { dim: 2 }, &ball, 1000, 1).unwrap();
        assert_eq!(
            id,
            ClaimStats {
                diagonal: 0.0,
                off_diagonal: 0.0,
                diagonal_l2: 0.0
            }
        );
        let quarter = EuclideanMotion::new(
            Matrix::from_row_slice(2, &[0.0, -1.0, 1.0, 0.0]),
            Vector::zeros(2),
        )
        .unwrap();
        let c = jacobian_claims_check(&quarter, &ball, 1000, 1).unwrap();
        assert!((c.diagonal - 1.0).abs() < 1e-15);
        assert!((c.off_diagonal - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sharpness_degenerate_at_zero() {
        let s = sharpness_experiment(0.0, 2, 100, 1, &DEFAULT_LAMBDAS).unwrap();
        assert!(s.degenerate && s.kappa.is_none());
        assert!(sharpness_experiment(0.5, 2, 100, 1, &DEFAULT_LAMBDAS).is_err());
    }

    #[test]
    fn log_log_fit_recovers_power_law() {
        let xs = [1e-3, 1e-2, 1e-1];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
        let (slope, c) = log_log_fit(&xs, &ys).unwrap();
        assert!((slope - 0.75).abs() < 1e-12 && (c - 3.0).abs() < 1e-12);
        assert!(log_log_fit(&[1.0], &[1.0]).is_err());
    }
}
