//! Small dense linear algebra for runtime dimension `D`.
//!
//! Matrices are square and stored row-major. The toolkit is deliberately
//! narrow: Hilbert–Schmidt norm, a one-sided Jacobi SVD, the orthogonal
//! polar factor, antisymmetric projection and the exponential of an
//! antisymmetric matrix.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{invalid, Error, Result};
use crate::tolerances;

/// A point or displacement in `R^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Vector(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * s).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        Vector(self.0.iter().map(|a| -a).collect())
    }
}

/// Square `D×D` real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.dim).map(|i| self.row(i)))
            .finish()
    }
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from nested rows; every row must have the same
    /// length as the number of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(invalid("matrix must have at least one row"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(invalid(format!(
                    "matrix is not square: row of length {} in a {}-row matrix",
                    row.len(),
                    dim
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    /// Builds a matrix from a row-major slice of length `dim²`.
    pub fn from_row_slice(dim: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), dim * dim, "row slice has wrong length");
        Matrix {
            dim,
            data: data.to_vec(),
        }
    }

    /// Matrix whose single entry is `value`; scalars are carried this way
    /// through the matrix-valued statistics.
    pub fn scalar(value: f64) -> Self {
        Matrix {
            dim: 1,
            data: vec![value],
        }
    }

    /// Outer product `a·bᵀ`.
    pub fn outer(a: &Vector, b: &Vector) -> Self {
        let dim = a.dim();
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = a[i] * b[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.dim).map(|i| self[(i, j)]).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(v.dim(), self.dim);
        Vector(
            (0..self.dim)
                .map(|i| self.row(i).iter().zip(&v.0).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Hilbert–Schmidt norm without the finiteness check.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
                .unwrap_or(col);
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                if factor != 0.0 {
                    for k in col..n {
                        a[r * n + k] -= factor * a[col * n + k];
                    }
                }
            }
        }
        det
    }

    /// `‖QᵀQ − I‖_HS`.
    pub fn orthogonality_defect(&self) -> f64 {
        (&(&self.transpose() * self) - &Matrix::identity(self.dim)).frobenius()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonality_defect() <= tolerances::ORTHOGONALITY
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetric_part(&self) -> Matrix {
        let mut s = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                s[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, rhs.dim);
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

/// Hilbert–Schmidt norm `(Σ M_ij²)^{1/2}`.
pub fn hs_norm(m: &Matrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(invalid("hs_norm: matrix has non-finite entries"));
    }
    Ok(m.frobenius())
}

/// `(M − Mᵀ)/2`, the nearest antisymmetric matrix in Hilbert–Schmidt norm.
pub fn antisymmetric_part(m: &Matrix) -> Matrix {
    let n = m.dim();
    let mut a = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = 0.5 * (m[(i, j)] - m[(j, i)]);
        }
    }
    a
}

/// Singular value decomposition `M = U·diag(σ)·Vᵀ` with `σ` sorted in
/// decreasing order and `U`, `V` orthogonal.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn smallest(&self) -> f64 {
        *self.singular_values.last().expect("dimension ≥ 1")
    }

    pub fn largest(&self) -> f64 {
        self.singular_values[0]
    }

    /// Orthogonal factor `U·E·Vᵀ` where `E` is the identity, or, when a
    /// proper rotation is requested and `det(U·Vᵀ) < 0`, the identity with
    /// the entry of the smallest singular value negated.
    pub fn orthogonal_factor(&self, proper: bool) -> Matrix {
        let n = self.u.dim();
        let mut v = self.v.clone();
        if proper && self.u.determinant() * self.v.determinant() < 0.0 {
            for i in 0..n {
                v[(i, n - 1)] = -v[(i, n - 1)];
            }
        }
        &self.u * &v.transpose()
    }
}

/// One-sided (Hestenes) Jacobi SVD. Works for any dimension; intended for
/// the small matrices used throughout the crate.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(invalid("svd: matrix has non-finite entries"));
    }
    let n = m.dim();
    // Column-major working copies: `a[j]` is column j.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| m.column(j).0).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..tolerances::JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|x| x * x).sum();
                let beta: f64 = a[q].iter().map(|x| x * x).sum();
                let gamma: f64 = a[p].iter().zip(&a[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0
                    || gamma.abs() <= tolerances::JACOBI_CONVERGENCE * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = a
        .iter()
        .enumerate()
        .map(|(j, col)| (col.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));

    let scale = order[0].0.max(f64::MIN_POSITIVE);
    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut v_mat = Matrix::zeros(n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(s, j)) in order.iter().enumerate() {
        sigma.push(s);
        for i in 0..n {
            v_mat[(i, k)] = v[j][i];
        }
        if s > scale * 1e-13 && s > 0.0 {
            u_cols.push(Some(a[j].iter().map(|x| x / s).collect()));
        } else {
            u_cols.push(None);
        }
    }
    let u_cols = complete_orthonormal(u_cols, n);
    let mut u = Matrix::zeros(n);
    for (k, col) in u_cols.iter().enumerate() {
        for i in 0..n {
            u[(i, k)] = col[i];
        }
    }
    Ok(Svd {
        u,
        singular_values: sigma,
        v: v_mat,
    })
}

fn rotate_columns(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the missing columns of a partial orthonormal set by Gram–Schmidt
/// against the standard basis.
fn complete_orthonormal(cols: Vec<Option<Vec<f64>>>, n: usize) -> Vec<Vec<f64>> {
    let known: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut basis = known.clone();
    let mut extra = Vec::new();
    for e in 0..n {
        if basis.len() == n {
            break;
        }
        let mut cand: Vec<f64> = (0..n).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
        // Two passes of modified Gram–Schmidt for stability.
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in cand.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            let unit: Vec<f64> = cand.iter().map(|x| x / norm).collect();
            basis.push(unit.clone());
            extra.push(unit);
        }
    }
    let mut extra = extra.into_iter();
    cols.into_iter()
        .map(|c| c.unwrap_or_else(|| extra.next().expect("completion is always possible")))
        .collect()
}

/// The orthogonal matrix `U·Vᵀ` nearest to `M` in Hilbert–Schmidt norm.
pub fn polar_orthogonal_factor(m: &Matrix) -> Result<Matrix> {
    let decomposition = svd(m)?;
    let smallest = decomposition.smallest();
    if smallest <= tolerances::RANK_CUTOFF {
        return Err(Error::Degenerate {
            context: "polar factor of a rank-deficient matrix".into(),
            smallest_singular_value: smallest,
        });
    }
    Ok(decomposition.orthogonal_factor(false))
}

/// Matrix exponential of an antisymmetric matrix. The result lies in `SO(D)`.
///
/// Scaling and squaring around a Taylor series: the argument is halved
/// until its norm is at most 1/2, where 24 terms give full double precision.
pub fn exp_antisymmetric(s: &Matrix) -> Result<Matrix> {
    if !s.is_finite() {
        return Err(invalid("exp_antisymmetric: non-finite entries"));
    }
    let n = s.dim();
    let scale_tol = tolerances::ANTISYMMETRY * s.frobenius().max(1.0);
    for i in 0..n {
        for j in 0..n {
            if (s[(i, j)] + s[(j, i)]).abs() > scale_tol {
                return Err(invalid(format!(
                    "exp_antisymmetric: S + Sᵀ has entry {:e} at ({i}, {j})",
                    s[(i, j)] + s[(j, i)]
                )));
            }
        }
    }
    // Enforce exact antisymmetry so that rounding cannot leak out of so(D).
    let s = antisymmetric_part(s);
    let norm = s.frobenius();
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) > 0.5 {
        squarings += 1;
    }
    let a = s.scale(1.0 / 2f64.powi(squarings as i32));

    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=24 {
        term = (&term * &a).scale(1.0 / k as f64);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Orthogonal map plus translation, `x ↦ rotation·x + translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanMotion {
    rotation: Matrix,
    translation: Vector,
    proper: bool,
}

impl EuclideanMotion {
    pub fn new(rotation: Matrix, translation: Vector) -> Result<Self> {
        if translation.dim() != rotation.dim() {
            return Err(Error::DimensionMismatch {
                expected: rotation.dim(),
                got: translation.dim(),
            });
        }
        if !translation.is_finite() || !rotation.is_finite() {
            return Err(invalid("Euclidean motion has non-finite entries"));
        }
        let defect = rotation.orthogonality_defect();
        if defect > tolerances::ORTHOGONALITY {
            return Err(invalid(format!(
                "rotation part is not orthogonal: ‖QᵀQ − I‖ = {defect:e}"
            )));
        }
        let proper = rotation.determinant() > 0.0;
        Ok(EuclideanMotion {
            rotation,
            translation,
            proper,
        })
    }

    pub fn identity(dim: usize) -> Self {
        EuclideanMotion {
            rotation: Matrix::identity(dim),
            translation: Vector::zeros(dim),
            proper: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    pub fn rotation(&self) -> &Matrix {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.rotation.mul_vec(x) + &self.translation
    }

    /// `x ↦ Qᵀ(x − b)`.
    pub fn inverse(&self) -> EuclideanMotion {
        let qt = self.rotation.transpose();
        let translation = -&qt.mul_vec(&self.translation);
        EuclideanMotion {
            rotation: qt,
            translation,
            proper: self.proper,
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &EuclideanMotion) -> EuclideanMotion {
        EuclideanMotion {
            rotation: &self.rotation * &inner.rotation,
            translation: &self.rotation.mul_vec(&inner.translation) + &self.translation,
            proper: self.proper == inner.proper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> Matrix {
        let data: Vec<f64> = (0..n * n)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Matrix::from_row_slice(n, &data)
    }

    fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Matrix {
        let s = antisymmetric_part(&random_matrix(rng, n, 3.0));
        let mut q = exp_antisymmetric(&s).unwrap();
        if rng.random_bool(0.5) {
            for j in 0..n {
                q[(0, j)] = -q[(0, j)];
            }
        }
        q
    }

    fn rot2(theta: f64) -> Matrix {
        Matrix::from_rows(&[
            vec![theta.cos(), theta.sin()],
            vec![-theta.sin(), theta.cos()],
        ])
        .unwrap()
    }

    #[test]
    fn hs_norm_examples() {
        assert_abs_diff_eq!(
            hs_norm(&Matrix::identity(3)).unwrap(),
            3f64.sqrt(),
            epsilon = 1e-15
        );
        let m = Matrix::from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(hs_norm(&m).unwrap(), 5.0);
        assert_eq!(hs_norm(&Matrix::zeros(4)).unwrap(), 0.0);
    }

    #[test]
    fn hs_norm_rejects_nan() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(hs_norm(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn symmetric_spectrum_bound() {
        // Symmetric M with spectrum in [1−λ, 1+λ] is within √D·λ of I.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lambda = 0.1;
        for _ in 0..1000 {
            let n = rng.random_range(2..=5);
            let q = random_orthogonal(&mut rng, n);
            let spectrum: Vec<f64> = (0..n)
                .map(|_| 1.0 + rng.random_range(-lambda..=lambda))
                .collect();
            let m = &(&q * &Matrix::from_diagonal(&spectrum)) * &q.transpose();
            let dev = hs_norm(&(&m - &Matrix::identity(n))).unwrap();
            assert!(dev <= (n as f64).sqrt() * lambda + 1e-12, "dev {dev}");
        }
    }

    #[test]
    fn svd_reconstructs_and_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            for _ in 0..20 {
                let m = random_matrix(&mut rng, n, 2.0);
                let d = svd(&m).unwrap();
                let rebuilt =
                    &(&d.u * &Matrix::from_diagonal(&d.singular_values)) * &d.v.transpose();
                assert!((&rebuilt - &m).frobenius() < 1e-12);
                assert!(d.u.is_orthogonal() && d.v.is_orthogonal());
                let reference = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice())
                    .singular_values()
                    .as_slice()
                    .to_vec();
                let mut reference = reference;
                reference.sort_by(|a, b| b.total_cmp(a));
                for (a, b) in d.singular_values.iter().zip(&reference) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn svd_of_rank_deficient_completes_u() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let d = svd(&m).unwrap();
        assert!(d.u.is_orthogonal());
        assert!(d.smallest() < 1e-14);
        let rebuilt = &(&d.u * &Matrix::from_diagonal(&d.singular_values)) * &d.v.transpose();
        assert!((&rebuilt - &m).frobenius() < 1e-12);
    }

    #[test]
    fn polar_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=5 {
            let q = random_orthogonal(&mut rng, n);
            let p = polar_orthogonal_factor(&q).unwrap();
            assert!((&p - &q).frobenius() < 1e-12);
        }
        let d = Matrix::from_diagonal(&[2.0, 3.0]);
        let p = polar_orthogonal_factor(&d).unwrap();
        assert!((&p - &Matrix::identity(2)).frobenius() < 1e-14);
    }

    #[test]
    fn polar_rejects_rank_deficient() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        match polar_orthogonal_factor(&m) {
            Err(Error::Degenerate {
                smallest_singular_value,
                ..
            }) => assert!(smallest_singular_value < 1e-12),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn polar_matches_angle_grid_in_2d() {
        // Brute force over rotations and reflections by angle.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 2, 2.0);
            if svd(&m).unwrap().smallest() < 1e-3 {
                continue;
            }
            let p = polar_orthogonal_factor(&m).unwrap();
            let ours = (&m - &p).frobenius();
            let steps = 50_000;
            let mut best = f64::INFINITY;
            for k in 0..steps {
                let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
                let (c, s) = (t.cos(), t.sin());
                let rot = Matrix::from_row_slice(2, &[c, -s, s, c]);
                let refl = Matrix::from_row_slice(2, &[c, s, s, -c]);
                best = best
                    .min((&m - &rot).frobenius())
                    .min((&m - &refl).frobenius());
            }
            assert!(ours <= best + 1e-12);
            assert!(best - ours < 1e-3);
        }
    }

    #[test]
    fn polar_is_optimal_against_random_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.random_range(2..=4);
            let m = random_matrix(&mut rng, n, 2.0);
            let Ok(p) = polar_orthogonal_factor(&m) else {
                continue;
            };
            let ours = (&m - &p).frobenius();
            for _ in 0..100 {
                let q = random_orthogonal(&mut rng, n);
                assert!(ours <= (&m - &q).frobenius() + 1e-9);
            }
        }
    }

    #[test]
    fn antisymmetric_part_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let a = antisymmetric_part(&m);
        assert_eq!(
            a,
            Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()
        );
        let sym = m.symmetric_part();
        assert_eq!(antisymmetric_part(&sym).max_abs(), 0.0);
        assert_eq!(antisymmetric_part(&a), a);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(
            exp_antisymmetric(&Matrix::zeros(3)).unwrap(),
            Matrix::identity(3)
        );
        let theta = 0.3;
        let s = Matrix::from_rows(&[vec![0.0, theta], vec![-theta, 0.0]]).unwrap();
        let r = exp_antisymmetric(&s).unwrap();
        assert!((&r - &rot2(theta)).frobenius() < 1e-15);
    }

    #[test]
    fn exp_rejects_non_antisymmetric() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(exp_antisymmetric(&m).is_err());
    }

    #[test]
    fn exp_close_to_first_order_for_small_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let n = rng.random_range(2..=6);
            let mut s = antisymmetric_part(&random_matrix(&mut rng, n, 1.0));
            let target = rng.random_range(0.0..0.5);
            s = s.scale(target / s.frobenius());
            let r = exp_antisymmetric(&s).unwrap();
            let first = &Matrix::identity(n) + &s;
            assert!((&r - &first).frobenius() <= s.frobenius().powi(2));
        }
    }

    #[test]
    fn motion_inverse_and_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = random_orthogonal(&mut rng, 3);
        let m = EuclideanMotion::new(q, Vector(vec![1.0, -2.0, 0.5])).unwrap();
        let x = Vector(vec![0.3, 0.1, -4.0]);
        let back = m.inverse().apply(&m.apply(&x));
        assert!(back.distance(&x) < 1e-14);
        let id = m.inverse().compose(&m);
        assert!((id.rotation() - &Matrix::identity(3)).frobenius() < 1e-14);
        assert!(id.translation().norm() < 1e-14);
        assert!(id.is_proper());
    }

    #[test]
    fn motion_rejects_non_orthogonal() {
        assert!(
            EuclideanMotion::new(Matrix::from_diagonal(&[1.0, 2.0]), Vector::zeros(2)).is_err()
        );
        assert!(EuclideanMotion::new(Matrix::identity(2), Vector::zeros(3)).is_err());
    }

    proptest! {
        #[test]
        fn exp_is_special_orthogonal(n in 2usize..=6, seed in any::<u64>(), norm in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = antisymmetric_part(&random_matrix(&mut rng, n, 1.0));
            let f = s.frobenius();
            if f > 0.0 {
                s = s.scale(norm / f);
            }
            let r = exp_antisymmetric(&s).unwrap();
            prop_assert!(r.orthogonality_defect() <= 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn antisymmetric_split_is_orthogonal(n in 1usize..=6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, n, 5.0);
            let a = antisymmetric_part(&m);
            let s = m.symmetric_part();
            prop_assert_eq!(antisymmetric_part(&a), a.clone());
            prop_assert_eq!((&a + &a.transpose()).max_abs(), 0.0);
            let lhs = m.frobenius().powi(2);
            let rhs = s.frobenius().powi(2) + a.frobenius().powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }
}
