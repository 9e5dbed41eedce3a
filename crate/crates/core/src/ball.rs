//! Monte Carlo statistics over balls: uniform sampling, mean oscillation,
//! BMO norm estimates and empirical John–Nirenberg tails.
//!
//! Averages `1/vol B ∫_B` are realised as sample means over a
//! [`BallSample`]. Scalars travel as `1×1` matrices so that the scalar and
//! matrix-valued statistics share one code path (the Hilbert–Schmidt norm of
//! a `1×1` matrix is the absolute value).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rng;

/// Open ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if !center.is_finite() {
            return Err(invalid("ball center must be finite"));
        }
        Ok(Ball { center, radius })
    }

    /// `B(0, radius)` in dimension `dim`.
    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Ball::new(Vector::zeros(dim), radius)
    }

    pub fn unit(dim: usize) -> Self {
        Ball {
            center: Vector::zeros(dim),
            radius: 1.0,
        }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.distance(&self.center) < self.radius
    }
}

/// How uniform points in the unit ball are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingScheme {
    /// Uniform in the cube, rejected outside the ball. Limited to `D ≤ 6`
    /// where the acceptance rate stays above 8%.
    Rejection,
    /// Gaussian direction times radius `U^{1/D}`.
    Polar,
}

impl SamplingScheme {
    pub fn name(self) -> &'static str {
        match self {
            SamplingScheme::Rejection => "uniform-rejection",
            SamplingScheme::Polar => "polar",
        }
    }
}

/// Largest dimension accepted by [`SamplingScheme::Rejection`].
pub const MAX_REJECTION_DIM: usize = 6;

/// Uniform sample of a ball, reproducible from `(ball, seed, scheme, len)`.
#[derive(Clone, Debug)]
pub struct BallSample {
    ball: Ball,
    points: Vec<Vector>,
    seed: u64,
    scheme: SamplingScheme,
}

impl BallSample {
    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn unit_ball_point<R: Rng>(rng: &mut R, dim: usize, scheme: SamplingScheme) -> Vec<f64> {
    match scheme {
        SamplingScheme::Rejection => loop {
            let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if u.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                break u;
            }
        },
        SamplingScheme::Polar => loop {
            let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let r = rng.random::<f64>().powf(1.0 / dim as f64);
            break g.into_iter().map(|v| v * r / norm).collect();
        },
    }
}

/// Draws `n` independent uniform points from `ball`.
pub fn sample_ball(ball: &Ball, n: usize, seed: u64, scheme: SamplingScheme) -> Result<BallSample> {
    if n == 0 {
        return Err(invalid("sample_ball needs at least one point"));
    }
    let dim = ball.dim();
    if dim == 0 {
        return Err(invalid("ball dimension must be at least 1"));
    }
    if scheme == SamplingScheme::Rejection && dim > MAX_REJECTION_DIM {
        return Err(invalid(format!(
            "rejection sampling is limited to D ≤ {MAX_REJECTION_DIM}, got D = {dim}"
        )));
    }
    let chunks: Vec<Vec<Vector>> = rng::chunks(n)
        .into_par_iter()
        .map(|(index, _, len)| {
            let mut rng = rng::task_rng(seed, index);
            (0..len)
                .map(|_| {
                    let u = unit_ball_point(&mut rng, dim, scheme);
                    Vector(
                        u.iter()
                            .zip(ball.center().as_slice())
                            .map(|(u, c)| c + ball.radius() * u)
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();
    Ok(BallSample {
        ball: ball.clone(),
        points: chunks.into_iter().flatten().collect(),
        seed,
        scheme,
    })
}

/// A scalar or matrix valued function on `R^D`.
pub trait Field: Sync {
    fn value(&self, x: &Vector) -> Matrix;
}

/// Scalar field from a closure.
pub struct ScalarField<F>(pub F);

impl<F: Fn(&Vector) -> f64 + Sync> Field for ScalarField<F> {
    fn value(&self, x: &Vector) -> Matrix {
        Matrix::scalar((self.0)(x))
    }
}

/// Matrix field from a closure.
pub struct MatrixField<F>(pub F);

impl<F: Fn(&Vector) -> Matrix + Sync> Field for MatrixField<F> {
    fn value(&self, x: &Vector) -> Matrix {
        (self.0)(x)
    }
}

/// Choice of the constant `H_B`.
#[derive(Clone, Debug)]
pub enum Centering {
    Mean,
    Given(Matrix),
}

/// One row of an empirical tail: the fraction of sample points whose
/// deviation exceeds `threshold = C·λ·K̂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailPoint {
    pub lambda: f64,
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug)]
pub struct OscillationStats {
    pub h_b: Matrix,
    pub mean_dev: f64,
    /// `(mean |f − H_B|⁴)^{1/4}`.
    pub p4_dev: f64,
    pub max_dev: f64,
    pub tail: Vec<TailPoint>,
}

/// Evaluates `field` on every sample point, failing on the first
/// non-finite value.
pub fn evaluate_field<F: Field + ?Sized>(field: &F, sample: &BallSample) -> Result<Vec<Matrix>> {
    let values: Vec<Matrix> = sample.points().par_iter().map(|x| field.value(x)).collect();
    if let Some((i, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "field value".into(),
            point: sample.points()[i].0.clone(),
        });
    }
    Ok(values)
}

/// Entrywise sample mean.
pub fn mean_matrix(values: &[Matrix]) -> Matrix {
    let dim = values[0].dim();
    let mut acc = vec![0.0; dim * dim];
    for v in values {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += x;
        }
    }
    let n = values.len() as f64;
    Matrix::from_row_slice(dim, &acc.iter().map(|a| a / n).collect::<Vec<_>>())
}

/// `|f(x_k) − H|` for every sample value.
pub fn deviations(values: &[Matrix], h: &Matrix) -> Vec<f64> {
    values.par_iter().map(|v| (v - h).frobenius()).collect()
}

/// Mean, fourth-moment root and maximum of a list of deviations.
pub fn moment_summary(devs: &[f64]) -> (f64, f64, f64) {
    let n = devs.len() as f64;
    let mean = devs.iter().sum::<f64>() / n;
    let p4 = (devs.iter().map(|d| d.powi(4)).sum::<f64>() / n).powf(0.25);
    let max = devs.iter().fold(0.0f64, |m, d| m.max(*d));
    // The computed root can undershoot the mean by a rounding error when all
    // deviations coincide; the power-mean inequality holds exactly in reals.
    (mean, p4.max(mean), max.max(p4.max(mean)))
}

/// Mean oscillation of `field` over the sampled ball.
pub fn mean_oscillation<F: Field + ?Sized>(
    field: &F,
    sample: &BallSample,
    centering: &Centering,
) -> Result<OscillationStats> {
    let values = evaluate_field(field, sample)?;
    let h_b = match centering {
        Centering::Mean => mean_matrix(&values),
        Centering::Given(h) => {
            if h.dim() != values[0].dim() {
                return Err(Error::DimensionMismatch {
                    expected: values[0].dim(),
                    got: h.dim(),
                });
            }
            h.clone()
        }
    };
    let devs = deviations(&values, &h_b);
    let (mean_dev, p4_dev, max_dev) = moment_summary(&devs);
    Ok(OscillationStats {
        h_b,
        mean_dev,
        p4_dev,
        max_dev,
        tail: Vec::new(),
    })
}

/// Lower estimate of `‖f‖_BMO`: the largest mean-centred oscillation over a
/// finite family of balls. The true norm is a supremum over all balls, so
/// this never overestimates it beyond sampling noise.
pub fn bmo_norm_estimate<F: Field + ?Sized>(
    field: &F,
    balls: &[Ball],
    n_per_ball: usize,
    seed: u64,
    scheme: SamplingScheme,
) -> Result<f64> {
    if balls.is_empty() {
        return Err(invalid("bmo_norm_estimate needs at least one ball"));
    }
    let mut best = 0.0f64;
    for (i, ball) in balls.iter().enumerate() {
        let sample = sample_ball(ball, n_per_ball, rng::derive_seed(seed, i as u64), scheme)?;
        best = best.max(mean_oscillation(field, &sample, &Centering::Mean)?.mean_dev);
    }
    Ok(best)
}

fn validate_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(invalid("tail needs at least one λ"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 1.0)) {
        return Err(invalid("every λ must be finite and at least 1"));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("λ values must be sorted ascending"));
    }
    Ok(())
}

/// Fractions of `devs` strictly above `c·λ·scale` for each λ.
pub fn tail_fractions(devs: &[f64], scale: f64, c: f64, lambdas: &[f64]) -> Result<Vec<TailPoint>> {
    validate_lambdas(lambdas)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!(
            "calibration constant must be positive, got {c}"
        )));
    }
    let n = devs.len() as f64;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let threshold = c * lambda * scale;
            let count = devs.iter().filter(|d| **d > threshold).count();
            TailPoint {
                lambda,
                threshold,
                fraction: count as f64 / n,
            }
        })
        .collect())
}

/// Smallest `C` with `#{d > C·scale}/n ≤ target`.
///
/// Returns `None` when `scale` is zero (every deviation is then zero and no
/// constant is needed).
pub fn calibrate_tail_constant(devs: &[f64], scale: f64, target: f64) -> Option<f64> {
    if scale <= 0.0 || devs.is_empty() {
        return None;
    }
    let mut sorted = devs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let allowed = ((target * n as f64).floor() as usize).min(n - 1);
    Some(sorted[n - 1 - allowed] / scale)
}

/// Empirical John–Nirenberg tail of `field` around `h_b` with norm estimate
/// `norm_estimate` and calibration constant `c`.
pub fn jn_tail<F: Field + ?Sized>(
    field: &F,
    sample: &BallSample,
    h_b: &Matrix,
    norm_estimate: f64,
    c: f64,
    lambdas: &[f64],
) -> Result<Vec<TailPoint>> {
    validate_lambdas(lambdas)?;
    let values = evaluate_field(field, sample)?;
    let devs = deviations(&values, h_b);
    tail_fractions(&devs, norm_estimate, c, lambdas)
}

/// Standard deviation of a binomial proportion with success probability `p`.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}
