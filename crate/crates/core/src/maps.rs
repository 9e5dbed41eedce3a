//! Differentiable maps of `R^D`, the slow-twist family, and sampled
//! distortion estimates.

use std::sync::Arc;

use rayon::prelude::*;

use crate::align::procrustes_motion;
use crate::ball::{sample_ball, Ball, SamplingScheme, MAX_REJECTION_DIM};
use crate::error::{invalid, Error, Result};
use crate::linalg::{svd, EuclideanMotion, Matrix, Vector};
use crate::rng;
use crate::tolerances;

/// A smooth map `R^D → R^D` with its Jacobian.
pub trait DifferentiableMap: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    /// `J_ij = ∂Φ_i/∂x_j`.
    fn jacobian(&self, x: &Vector) -> Matrix;
}

impl<M: DifferentiableMap + ?Sized> DifferentiableMap for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &Vector) -> Vector {
        (**self).eval(x)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        (**self).jacobian(x)
    }
}

impl<M: DifferentiableMap + ?Sized> DifferentiableMap for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &Vector) -> Vector {
        (**self).eval(x)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        (**self).jacobian(x)
    }
}

impl<M: DifferentiableMap + ?Sized> DifferentiableMap for Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &Vector) -> Vector {
        (**self).eval(x)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        (**self).jacobian(x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IdentityMap {
    pub dim: usize,
}

impl DifferentiableMap for IdentityMap {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Vector) -> Vector {
        x.clone()
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.dim)
    }
}

impl DifferentiableMap for EuclideanMotion {
    fn dim(&self) -> usize {
        EuclideanMotion::dim(self)
    }
    fn eval(&self, x: &Vector) -> Vector {
        self.apply(x)
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.rotation().clone()
    }
}

/// Central-difference Jacobian with step `h·max(1, |x|)`.
pub fn finite_difference_jacobian<F>(f: F, x: &Vector, h: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let dim = x.dim();
    let step = h * x.norm().max(1.0);
    let mut j = Matrix::zeros(dim);
    let mut probe = x.clone();
    for col in 0..dim {
        probe[col] = x[col] + step;
        let plus = f(&probe);
        probe[col] = x[col] - step;
        let minus = f(&probe);
        probe[col] = x[col];
        for row in 0..dim {
            j[(row, col)] = (plus[row] - minus[row]) / (2.0 * step);
        }
    }
    j
}

/// Relative step of the finite-difference fallback.
pub const FD_STEP: f64 = 1e-5;

/// A user map without an analytic derivative; the Jacobian comes from
/// central differences.
pub struct FiniteDifferenceMap<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Vector) -> Vector + Send + Sync> FiniteDifferenceMap<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FiniteDifferenceMap { dim, f }
    }
}

impl<F: Fn(&Vector) -> Vector + Send + Sync> DifferentiableMap for FiniteDifferenceMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        finite_difference_jacobian(&self.f, x, FD_STEP)
    }
}

/// Rotation angle `f(t)` of a slow-twist block as a function of `t = |x|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleProfile {
    /// `f(t) = θ`.
    Constant { angle: f64 },
    /// `f(t) = a·arctan(t)`; `t·f'(t) = a·t/(1+t²) ≤ a/2`.
    Arctan { amplitude: f64 },
    /// `f(t) = a·ln(t/t₀)` for `t ≥ t₀`, continued below `t₀` by the
    /// quadratic `a·(t²/t₀² − 1)/2`, which matches value and slope at `t₀`
    /// and is flat at the origin. `t·f'(t) = a` exactly for `t ≥ t₀`.
    Log { amplitude: f64, clamp: f64 },
}

impl AngleProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            AngleProfile::Constant { angle } => angle,
            AngleProfile::Arctan { amplitude } => amplitude * t.atan(),
            AngleProfile::Log { amplitude, clamp } => {
                if t >= clamp {
                    amplitude * (t / clamp).ln()
                } else {
                    0.5 * amplitude * (t * t / (clamp * clamp) - 1.0)
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            AngleProfile::Constant { .. } => 0.0,
            AngleProfile::Arctan { amplitude } => amplitude / (1.0 + t * t),
            AngleProfile::Log { amplitude, clamp } => {
                if t >= clamp {
                    amplitude / t
                } else {
                    amplitude * t / (clamp * clamp)
                }
            }
        }
    }

    /// `sup_{t ≥ 0} t·|f'(t)|`.
    pub fn c_bound(&self) -> f64 {
        match *self {
            AngleProfile::Constant { .. } => 0.0,
            AngleProfile::Arctan { amplitude } => 0.5 * amplitude.abs(),
            AngleProfile::Log { amplitude, .. } => amplitude.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            AngleProfile::Constant { angle } => angle.is_finite(),
            AngleProfile::Arctan { amplitude } => amplitude.is_finite(),
            AngleProfile::Log { amplitude, clamp } => {
                amplitude.is_finite() && clamp.is_finite() && clamp > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid angle profile {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TwistBlock {
    Identity1,
    Rotation2(AngleProfile),
}

impl TwistBlock {
    fn size(&self) -> usize {
        match self {
            TwistBlock::Identity1 => 1,
            TwistBlock::Rotation2(_) => 2,
        }
    }
}

/// `Φ(x) = Θᵀ·S_x·(Θx)` where `S_x` is block diagonal with `1×1`
/// identities and `2×2` rotations by `f_i(|x|)`.
#[derive(Clone, Debug)]
pub struct SlowTwist {
    dim: usize,
    blocks: Vec<TwistBlock>,
    theta: Matrix,
}

impl SlowTwist {
    pub fn new(blocks: Vec<TwistBlock>, theta: Matrix) -> Result<Self> {
        let dim: usize = blocks.iter().map(TwistBlock::size).sum();
        if dim == 0 {
            return Err(invalid("slow twist needs at least one block"));
        }
        if theta.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: theta.dim(),
            });
        }
        if !theta.is_orthogonal() || theta.determinant() <= 0.0 {
            return Err(invalid("slow twist frame Θ must lie in SO(D)"));
        }
        for b in &blocks {
            if let TwistBlock::Rotation2(p) = b {
                p.validate()?;
            }
        }
        Ok(SlowTwist { dim, blocks, theta })
    }

    /// `⌊D/2⌋` rotation blocks sharing `profile`, plus a trailing identity
    /// block when `D` is odd.
    pub fn uniform(dim: usize, profile: AngleProfile, theta: Matrix) -> Result<Self> {
        let mut blocks = vec![TwistBlock::Rotation2(profile); dim / 2];
        if dim % 2 == 1 {
            blocks.push(TwistBlock::Identity1);
        }
        SlowTwist::new(blocks, theta)
    }

    pub fn blocks(&self) -> &[TwistBlock] {
        &self.blocks
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    /// Largest `sup t·|f_i'(t)|` over the rotation blocks.
    pub fn c_bound(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| match b {
                TwistBlock::Identity1 => 0.0,
                TwistBlock::Rotation2(p) => p.c_bound(),
            })
            .fold(0.0, f64::max)
    }

    /// `S_x` for `|x| = r`.
    pub fn block_matrix(&self, r: f64) -> Matrix {
        let mut s = Matrix::zeros(self.dim);
        let mut k = 0;
        for b in &self.blocks {
            match b {
                TwistBlock::Identity1 => {
                    s[(k, k)] = 1.0;
                    k += 1;
                }
                TwistBlock::Rotation2(p) => {
                    let (sin, cos) = p.value(r).sin_cos();
                    s[(k, k)] = cos;
                    s[(k, k + 1)] = sin;
                    s[(k + 1, k)] = -sin;
                    s[(k + 1, k + 1)] = cos;
                    k += 2;
                }
            }
        }
        s
    }
}

impl DifferentiableMap for SlowTwist {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &Vector) -> Vector {
        let r = x.norm();
        let y = self.theta.mul_vec(x);
        let z = self.block_matrix(r).mul_vec(&y);
        self.theta.transpose().mul_vec(&z)
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let r = x.norm();
        let theta_t = self.theta.transpose();
        let mut inner = &self.block_matrix(r) * &self.theta;
        if r > 0.0 {
            // Radial term (dS/dr · Θx) ⊗ (x/r).
            let y = self.theta.mul_vec(x);
            let mut w = Vector::zeros(self.dim);
            let mut k = 0;
            for b in &self.blocks {
                match b {
                    TwistBlock::Identity1 => k += 1,
                    TwistBlock::Rotation2(p) => {
                        let (sin, cos) = p.value(r).sin_cos();
                        let fp = p.derivative(r);
                        w[k] = fp * (-sin * y[k] + cos * y[k + 1]);
                        w[k + 1] = fp * (-cos * y[k] - sin * y[k + 1]);
                        k += 2;
                    }
                }
            }
            inner = &inner + &Matrix::outer(&w, &x.scale(1.0 / r));
        }
        &theta_t * &inner
    }
}

/// `post ∘ map ∘ pre`.
pub struct ComposedMap<M> {
    map: M,
    pre: Option<EuclideanMotion>,
    post: Option<EuclideanMotion>,
}

impl<M: DifferentiableMap> DifferentiableMap for ComposedMap<M> {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn eval(&self, x: &Vector) -> Vector {
        let x = match &self.pre {
            Some(a) => a.apply(x),
            None => x.clone(),
        };
        let y = self.map.eval(&x);
        match &self.post {
            Some(b) => b.apply(&y),
            None => y,
        }
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let (inner_x, pre_q) = match &self.pre {
            Some(a) => (a.apply(x), Some(a.rotation())),
            None => (x.clone(), None),
        };
        let mut j = self.map.jacobian(&inner_x);
        if let Some(q) = pre_q {
            j = &j * q;
        }
        if let Some(b) = &self.post {
            j = b.rotation() * &j;
        }
        j
    }
}

pub fn compose_with_motion<M: DifferentiableMap>(
    map: M,
    pre: Option<EuclideanMotion>,
    post: Option<EuclideanMotion>,
) -> Result<ComposedMap<M>> {
    for m in pre.iter().chain(post.iter()) {
        if m.dim() != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                got: m.dim(),
            });
        }
    }
    Ok(ComposedMap { map, pre, post })
}

/// Sampling scheme used by the harness for a given dimension.
pub fn default_scheme(dim: usize) -> SamplingScheme {
    if dim <= MAX_REJECTION_DIM {
        SamplingScheme::Rejection
    } else {
        SamplingScheme::Polar
    }
}

#[derive(Clone, Debug)]
pub struct DistortionReport {
    /// Largest `max(1 − σ_min², σ_max² − 1)` over the sample.
    pub eps_hat: f64,
    pub worst_point: Vector,
    pub n_samples: usize,
}

/// Pointwise distortion `max(1 − σ_min², σ_max² − 1)` of a Jacobian.
pub fn pointwise_distortion(j: &Matrix) -> Result<f64> {
    let d = svd(j)?;
    let lo = 1.0 - d.smallest().powi(2);
    let hi = d.largest().powi(2) - 1.0;
    Ok(lo.max(hi).max(0.0))
}

/// Jacobians on a list of points, failing on the first non-finite one.
pub fn jacobians_at<M: DifferentiableMap + ?Sized>(
    map: &M,
    points: &[Vector],
) -> Result<Vec<Matrix>> {
    let js: Vec<Matrix> = points.par_iter().map(|x| map.jacobian(x)).collect();
    if let Some(i) = js.iter().position(|j| !j.is_finite()) {
        return Err(Error::NonFinite {
            context: "Jacobian".into(),
            point: points[i].0.clone(),
        });
    }
    Ok(js)
}

/// Sampled distortion over `region`. A lower estimate of the true `ε`,
/// which is a supremum over all of `R^D`.
pub fn distortion_estimate<M: DifferentiableMap + ?Sized>(
    map: &M,
    region: &Ball,
    n: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if region.dim() != map.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            got: region.dim(),
        });
    }
    let sample = sample_ball(region, n, seed, default_scheme(map.dim()))?;
    distortion_on_points(map, sample.points())
}

pub fn distortion_on_points<M: DifferentiableMap + ?Sized>(
    map: &M,
    points: &[Vector],
) -> Result<DistortionReport> {
    if points.is_empty() {
        return Err(invalid("distortion estimate needs at least one point"));
    }
    let js = jacobians_at(map, points)?;
    let dists = js
        .par_iter()
        .map(pointwise_distortion)
        .collect::<Result<Vec<f64>>>()?;
    let (idx, eps_hat) =
        dists
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
    Ok(DistortionReport {
        eps_hat,
        worst_point: points[idx].clone(),
        n_samples: points.len(),
    })
}

#[derive(Clone, Debug)]
pub struct ApproximationReport {
    pub motion: EuclideanMotion,
    /// `sup |Φ(x) − A(x)|` over a fresh sample of the fitting ball.
    pub sup_err: f64,
    /// `sup_err / ε`, the empirical constant; `None` when `ε = 0`.
    pub ratio: Option<f64>,
}

/// Fits a Euclidean motion `A` to `Φ` on `B(0, radius)` by least squares
/// and measures `sup |Φ(x) − A(x)|` on an independent sample.
pub fn approximation_lemma_check<M: DifferentiableMap + ?Sized>(
    map: &M,
    eps: f64,
    n: usize,
    seed: u64,
    radius: f64,
) -> Result<ApproximationReport> {
    let dim = map.dim();
    let ball = Ball::centered(dim, radius)?;
    let scheme = default_scheme(dim);
    let fit_sample = sample_ball(&ball, n, rng::derive_seed(seed, 0), scheme)?;
    let images: Vec<Vector> = fit_sample
        .points()
        .par_iter()
        .map(|x| map.eval(x))
        .collect();
    let fit = procrustes_motion(fit_sample.points(), &images, false)?;
    if fit.smallest_singular_value <= tolerances::RANK_CUTOFF * fit.largest_singular_value.max(1.0)
    {
        return Err(Error::Degenerate {
            context: "approximation lemma: sample covariance is rank deficient".into(),
            smallest_singular_value: fit.smallest_singular_value,
        });
    }
    let check = sample_ball(&ball, n, rng::derive_seed(seed, 1), scheme)?;
    let sup_err = check
        .points()
        .par_iter()
        .map(|x| map.eval(x).distance(&fit.motion.apply(x)))
        .reduce(|| 0.0, f64::max);
    Ok(ApproximationReport {
        motion: fit.motion,
        sup_err,
        ratio: (eps > 0.0).then(|| sup_err / eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{antisymmetric_part, exp_antisymmetric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_rotation(rng: &mut impl Rng, dim: usize) -> Matrix {
        let data: Vec<f64> = (0..dim * dim)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        exp_antisymmetric(&antisymmetric_part(&Matrix::from_row_slice(dim, &data))).unwrap()
    }

    fn random_point(rng: &mut impl Rng, dim: usize) -> Vector {
        Vector((0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
    }

    // Independent central-difference oracle with a fixed absolute step.
    fn fd_oracle<M: DifferentiableMap>(map: &M, x: &Vector, h: f64) -> Matrix {
        let d = map.dim();
        let mut j = Matrix::zeros(d);
        for c in 0..d {
            let mut p = x.clone();
            let mut m = x.clone();
            p[c] += h;
            m[c] -= h;
            let (fp, fm) = (map.eval(&p), map.eval(&m));
            for r in 0..d {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    fn twist(dim: usize, profile: AngleProfile, seed: u64) -> SlowTwist {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SlowTwist::uniform(dim, profile, random_rotation(&mut rng, dim)).unwrap()
    }

    #[test]
    fn identity_blocks_give_identity_map() {
        let tw = SlowTwist::new(vec![TwistBlock::Identity1; 3], Matrix::identity(3)).unwrap();
        let x = Vector(vec![1.0, -2.0, 3.0]);
        assert_eq!(tw.eval(&x), x);
        assert_eq!(tw.jacobian(&x), Matrix::identity(3));
    }

    #[test]
    fn zero_profile_is_exact_identity() {
        let tw = twist(4, AngleProfile::Arctan { amplitude: 0.0 }, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_point(&mut rng, 4);
            assert!(tw.eval(&x).distance(&x) < 1e-14);
            assert!((&tw.jacobian(&x) - &Matrix::identity(4)).frobenius() < 1e-14);
        }
    }

    #[test]
    fn origin_is_fixed() {
        let tw = twist(
            5,
            AngleProfile::Log {
                amplitude: 0.3,
                clamp: 0.1,
            },
            2,
        );
        assert_eq!(tw.eval(&Vector::zeros(5)), Vector::zeros(5));
        // At the origin the Jacobian is Θᵀ·S_0·Θ.
        let j0 = tw.jacobian(&Vector::zeros(5));
        let expected = &(&tw.theta().transpose() * &tw.block_matrix(0.0)) * tw.theta();
        assert!((&j0 - &expected).frobenius() < 1e-15);
    }

    #[test]
    fn arctan_twist_closed_form_in_2d() {
        let eps = 0.1;
        let tw = SlowTwist::uniform(
            2,
            AngleProfile::Arctan { amplitude: eps },
            Matrix::identity(2),
        )
        .unwrap();
        let angle = eps * PI / 4.0;
        // Block [[cos, sin], [−sin, cos]] applied to (1, 0).
        let out = tw.eval(&Vector(vec![1.0, 0.0]));
        assert!((out[0] - angle.cos()).abs() < 1e-15);
        assert!((out[1] + angle.sin()).abs() < 1e-15);
    }

    #[test]
    fn constant_profile_jacobian_is_constant_rotation() {
        let theta0 = 0.7;
        let tw = SlowTwist::uniform(
            2,
            AngleProfile::Constant { angle: theta0 },
            Matrix::identity(2),
        )
        .unwrap();
        let rot = Matrix::from_rows(&[
            vec![theta0.cos(), theta0.sin()],
            vec![-theta0.sin(), theta0.cos()],
        ])
        .unwrap();
        for x in [vec![0.3, 0.4], vec![-3.0, 2.0], vec![0.0, 0.0]] {
            assert!((&tw.jacobian(&Vector(x)) - &rot).frobenius() < 1e-15);
        }
    }

    #[test]
    fn twist_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let profiles = [
            AngleProfile::Arctan { amplitude: 0.4 },
            AngleProfile::Log {
                amplitude: 0.2,
                clamp: 0.1,
            },
            AngleProfile::Constant { angle: 1.1 },
        ];
        for dim in [2, 3, 5] {
            for (k, p) in profiles.iter().enumerate() {
                let tw = twist(dim, *p, 100 + k as u64);
                for _ in 0..100 {
                    let x = random_point(&mut rng, dim);
                    let err = (&tw.jacobian(&x) - &fd_oracle(&tw, &x, 1e-4)).max_abs();
                    assert!(err < 1e-6, "dim {dim} {p:?}: {err}");
                }
            }
        }
    }

    #[test]
    fn compositions_respect_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dim = 3;
        let a = EuclideanMotion::new(random_rotation(&mut rng, dim), random_point(&mut rng, dim))
            .unwrap();
        let b = EuclideanMotion::new(random_rotation(&mut rng, dim), random_point(&mut rng, dim))
            .unwrap();
        let tw = twist(dim, AngleProfile::Arctan { amplitude: 0.3 }, 8);
        let c = compose_with_motion(&tw, Some(a), Some(b)).unwrap();
        for _ in 0..100 {
            let x = random_point(&mut rng, dim);
            let err = (&c.jacobian(&x) - &fd_oracle(&c, &x, 1e-4)).max_abs();
            assert!(err < 1e-5, "{err}");
        }
    }

    #[test]
    fn finite_difference_map_matches_oracle() {
        let f = |x: &Vector| Vector(vec![x[0] + 0.1 * x[1].sin(), x[1] - 0.05 * x[0] * x[0]]);
        let m = FiniteDifferenceMap::new(2, f);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = random_point(&mut rng, 2);
            let exact =
                Matrix::from_rows(&[vec![1.0, 0.1 * x[1].cos()], vec![-0.1 * x[0], 1.0]]).unwrap();
            assert!((&m.jacobian(&x) - &exact).max_abs() < 1e-5);
        }
    }

    #[test]
    fn identity_motions_leave_map_unchanged() {
        let tw = twist(3, AngleProfile::Arctan { amplitude: 0.2 }, 1);
        let c = compose_with_motion(
            &tw,
            Some(EuclideanMotion::identity(3)),
            Some(EuclideanMotion::identity(3)),
        )
        .unwrap();
        let x = Vector(vec![0.5, -1.0, 2.0]);
        assert!(c.eval(&x).distance(&tw.eval(&x)) < 1e-15);
    }

    #[test]
    fn affine_from_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_rotation(&mut rng, 3);
        let b = Vector(vec![1.0, 2.0, 3.0]);
        let motion = EuclideanMotion::new(q.clone(), b.clone()).unwrap();
        let c = compose_with_motion(IdentityMap { dim: 3 }, None, Some(motion)).unwrap();
        let x = Vector(vec![0.1, 0.2, 0.3]);
        assert!(c.eval(&x).distance(&(&q.mul_vec(&x) + &b)) < 1e-15);
        assert_eq!(c.jacobian(&x), q);
    }

    #[test]
    fn composition_dimension_checked() {
        let r = compose_with_motion(
            IdentityMap { dim: 3 },
            None,
            Some(EuclideanMotion::identity(2)),
        );
        assert!(r.is_err());
    }

    #[test]
    fn distortion_of_rigid_maps() {
        let ball = Ball::centered(3, 3.0).unwrap();
        let id = distortion_estimate(&IdentityMap { dim: 3 }, &ball, 1000, 1).unwrap();
        assert_eq!(id.eps_hat, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = EuclideanMotion::new(random_rotation(&mut rng, 3), Vector(vec![1.0, 0.0, 0.0]))
            .unwrap();
        assert!(distortion_estimate(&q, &ball, 1000, 1).unwrap().eps_hat <= 1e-12);
    }

    #[test]
    fn arctan_twist_distortion_in_expected_band() {
        let eps = 0.1;
        let tw = twist(2, AngleProfile::Arctan { amplitude: eps }, 0);
        let ball = Ball::centered(2, 3.0).unwrap();
        let report = distortion_estimate(&tw, &ball, 100_000, 9).unwrap();
        assert!(
            report.eps_hat >= eps / 8.0 && report.eps_hat <= eps,
            "{}",
            report.eps_hat
        );
        assert_eq!(tw.c_bound(), eps / 2.0);
        assert!(ball.contains(&report.worst_point));
    }

    #[test]
    fn distortion_is_invariant_under_post_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tw = twist(3, AngleProfile::Arctan { amplitude: 0.1 }, 3);
        let a =
            EuclideanMotion::new(random_rotation(&mut rng, 3), random_point(&mut rng, 3)).unwrap();
        let moved = compose_with_motion(&tw, None, Some(a.inverse())).unwrap();
        let ball = Ball::centered(3, 3.0).unwrap();
        let d1 = distortion_estimate(&tw, &ball, 20_000, 5).unwrap();
        let d2 = distortion_estimate(&moved, &ball, 20_000, 5).unwrap();
        assert!((d1.eps_hat - d2.eps_hat).abs() <= 1e-12);
    }

    #[test]
    fn distortion_grows_with_region() {
        // Nested samples: the first n points of B(0, r) are a scaled copy of
        // the first n points of B(0, R) under the same seed.
        let tw = twist(2, AngleProfile::Arctan { amplitude: 0.1 }, 3);
        let small = distortion_estimate(&tw, &Ball::centered(2, 0.5).unwrap(), 20_000, 5).unwrap();
        let large = distortion_estimate(&tw, &Ball::centered(2, 3.0).unwrap(), 20_000, 5).unwrap();
        assert!(small.eps_hat <= large.eps_hat + 1e-3);
    }

    #[test]
    fn non_finite_jacobian_is_reported() {
        let bad = FiniteDifferenceMap::new(2, |x: &Vector| {
            Vector(vec![if x[0] > 0.5 { f64::NAN } else { x[0] }, x[1]])
        });
        let ball = Ball::unit(2);
        match distortion_estimate(&bad, &ball, 1000, 1) {
            Err(Error::NonFinite { point, .. }) => assert_eq!(point.len(), 2),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn approximation_lemma_on_rigid_maps() {
        let r = approximation_lemma_check(&IdentityMap { dim: 3 }, 0.0, 2000, 1, 10.0).unwrap();
        assert!(r.sup_err <= 1e-10);
        assert!((r.motion.rotation() - &Matrix::identity(3)).frobenius() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let q = random_rotation(&mut rng, 3);
        let b = Vector(vec![-1.0, 4.0, 0.25]);
        let motion = EuclideanMotion::new(q.clone(), b.clone()).unwrap();
        let r = approximation_lemma_check(&motion, 0.0, 2000, 1, 10.0).unwrap();
        assert!(r.sup_err <= 1e-10);
        assert!((r.motion.rotation() - &q).frobenius() < 1e-12);
        assert!(r.motion.translation().distance(&b) < 1e-12);
        assert!(r.ratio.is_none());
    }

    #[test]
    fn approximation_lemma_constant_is_stable_across_eps() {
        let ratios: Vec<f64> = [0.01, 0.05, 0.1]
            .iter()
            .map(|&eps| {
                let tw = twist(2, AngleProfile::Arctan { amplitude: eps }, 0);
                let d =
                    distortion_estimate(&tw, &Ball::centered(2, 10.0).unwrap(), 20_000, 1).unwrap();
                approximation_lemma_check(&tw, d.eps_hat, 20_000, 2, 10.0)
                    .unwrap()
                    .ratio
                    .unwrap()
            })
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!(hi / lo < 1.5, "{ratios:?}");
    }
}
