//! Labelled point-set alignment: pairwise-distance distortion and the
//! least-squares Euclidean motion between two corresponding point sets.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{exp_antisymmetric, svd, EuclideanMotion, Matrix, Vector};
use crate::rng;
use crate::tolerances;

/// Ordered points `y_1..y_k` in `R^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPointSet {
    points: Vec<Vector>,
    dim: usize,
}

impl LabeledPointSet {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].dim();
        if dim == 0 {
            return Err(invalid("points must have dimension at least 1"));
        }
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if !p.is_finite() {
                return Err(invalid("point set contains non-finite coordinates"));
            }
        }
        Ok(LabeledPointSet { points, dim })
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                d = d.max(self.points[i].distance(&self.points[j]));
            }
        }
        d
    }

    pub fn centroid(&self) -> Vector {
        centroid(&self.points)
    }

    /// Image of every point under `motion`.
    pub fn transformed(&self, motion: &EuclideanMotion) -> LabeledPointSet {
        LabeledPointSet {
            points: self.points.iter().map(|p| motion.apply(p)).collect(),
            dim: self.dim,
        }
    }
}

fn centroid(points: &[Vector]) -> Vector {
    let dim = points[0].dim();
    let mut c = vec![0.0; dim];
    for p in points {
        for (a, x) in c.iter_mut().zip(p.as_slice()) {
            *a += x;
        }
    }
    let n = points.len() as f64;
    Vector(c.into_iter().map(|a| a / n).collect())
}

/// `δ = max_{i<j} max(r_ij, 1/r_ij) − 1` with `r_ij = |z_i − z_j| / |y_i − y_j|`.
pub fn pairwise_distortion(source: &LabeledPointSet, target: &LabeledPointSet) -> Result<f64> {
    if source.len() != target.len() {
        return Err(invalid(format!(
            "point sets differ in length: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    let (y, z) = (source.points(), target.points());
    let mut delta = 0.0f64;
    for i in 0..y.len() {
        for j in i + 1..y.len() {
            let dy = y[i].distance(&y[j]);
            if dy == 0.0 {
                return Err(Error::CoincidentPoints { i, j });
            }
            let dz = z[i].distance(&z[j]);
            if dz == 0.0 {
                return Err(Error::CoincidentPoints { i, j });
            }
            let r = dz / dy;
            delta = delta.max(r.max(1.0 / r) - 1.0);
        }
    }
    Ok(delta)
}

/// Least-squares motion between corresponding points.
#[derive(Clone, Debug)]
pub struct ProcrustesFit {
    pub motion: EuclideanMotion,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

/// Minimises `Σ |z_i − (T·y_i + x₀)|²` over orthogonal `T` (or over
/// rotations when `require_proper`). The covariance may be rank deficient;
/// the minimiser is then not unique and one of them is returned.
pub fn procrustes_motion(
    source: &[Vector],
    target: &[Vector],
    require_proper: bool,
) -> Result<ProcrustesFit> {
    if source.len() != target.len() || source.is_empty() {
        return Err(invalid(
            "procrustes needs two non-empty point lists of equal length",
        ));
    }
    let dim = source[0].dim();
    let (ybar, zbar) = (centroid(source), centroid(target));
    let mut h = Matrix::zeros(dim);
    for (y, z) in source.iter().zip(target) {
        let dy = y - &ybar;
        let dz = z - &zbar;
        for a in 0..dim {
            for b in 0..dim {
                h[(a, b)] += dz[a] * dy[b];
            }
        }
    }
    let d = svd(&h)?;
    let t = d.orthogonal_factor(require_proper);
    let x0 = &zbar - &t.mul_vec(&ybar);
    Ok(ProcrustesFit {
        motion: EuclideanMotion::new(t, x0)?,
        smallest_singular_value: d.smallest(),
        largest_singular_value: d.largest(),
    })
}

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    pub motion: EuclideanMotion,
    /// `max_i |z_i − Φ₀(y_i)| / diam{y}`.
    pub max_rel_err: f64,
    /// `(mean_i |z_i − Φ₀(y_i)|²)^{1/2}`.
    pub rms_err: f64,
    pub delta_in: f64,
    pub warnings: Vec<String>,
}

/// Aligns `source` onto `target` with the least-squares Euclidean motion.
pub fn procrustes_align(
    source: &LabeledPointSet,
    target: &LabeledPointSet,
    require_proper: bool,
) -> Result<AlignmentResult> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            got: target.dim(),
        });
    }
    let delta_in = pairwise_distortion(source, target)?;
    let fit = procrustes_motion(source.points(), target.points(), require_proper)?;
    let mut warnings = Vec::new();
    let rank_deficient = fit.smallest_singular_value
        <= tolerances::RANK_CUTOFF * fit.largest_singular_value.max(1.0);
    if rank_deficient && require_proper && source.len() > source.dim() {
        warnings.push(format!(
            "cross-covariance is rank deficient (smallest singular value {:e}); the proper motion is not unique",
            fit.smallest_singular_value
        ));
    }
    let errs: Vec<f64> = source
        .points()
        .iter()
        .zip(target.points())
        .map(|(y, z)| z.distance(&fit.motion.apply(y)))
        .collect();
    let diam = source.diameter();
    let max_err = errs.iter().fold(0.0f64, |m, e| m.max(*e));
    let rms_err = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    Ok(AlignmentResult {
        motion: fit.motion,
        max_rel_err: max_err / diam,
        rms_err,
        delta_in,
        warnings,
    })
}

/// Minimum pairwise separation of generated configurations.
pub const MIN_SEPARATION: f64 = 1e-2;

/// `k` points uniform in the unit cube, pairwise at least
/// [`MIN_SEPARATION`] apart.
pub fn random_configuration<R: Rng>(rng: &mut R, k: usize, dim: usize) -> LabeledPointSet {
    let mut points: Vec<Vector> = Vec::with_capacity(k);
    while points.len() < k {
        let p = Vector((0..dim).map(|_| rng.random::<f64>()).collect());
        if points.iter().all(|q| q.distance(&p) >= MIN_SEPARATION) {
            points.push(p);
        }
    }
    LabeledPointSet { points, dim }
}

fn random_motion<R: Rng>(rng: &mut R, dim: usize) -> EuclideanMotion {
    let mut s = Matrix::zeros(dim);
    for i in 0..dim {
        for j in i + 1..dim {
            let v = rng.random_range(-3.0..3.0);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    let q = exp_antisymmetric(&s).expect("antisymmetric by construction");
    let b = Vector((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    EuclideanMotion::new(q, b).expect("orthogonal by construction")
}

/// A congruent copy of `source` whose pairwise distortion is exactly
/// `delta` (to bisection precision): `A(y + t·g)` for a random motion `A`,
/// a random unit-scale perturbation `g`, and `t` solved by bisection.
/// Returns `None` when the perturbation direction cannot reach `delta`.
pub fn perturb_to_distortion<R: Rng>(
    rng: &mut R,
    source: &LabeledPointSet,
    delta: f64,
) -> Option<LabeledPointSet> {
    let dim = source.dim();
    let motion = random_motion(rng, dim);
    if delta == 0.0 {
        return Some(source.transformed(&motion));
    }
    let g: Vec<Vector> = (0..source.len())
        .map(|_| Vector((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let perturbed = |t: f64| -> Option<LabeledPointSet> {
        let pts = source
            .points()
            .iter()
            .zip(&g)
            .map(|(y, gi)| motion.apply(&(y + &gi.scale(t))))
            .collect();
        LabeledPointSet::new(pts).ok()
    };
    let distortion = |t: f64| -> f64 {
        perturbed(t)
            .and_then(|z| pairwise_distortion(source, &z).ok())
            .unwrap_or(f64::INFINITY)
    };
    // δ(t) is continuous with δ(0) = 0; bracket, then bisect.
    let mut hi = delta.max(1e-12);
    let mut tries = 0;
    while distortion(hi) < delta {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if distortion(mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let out = perturbed(hi)?;
    let achieved = pairwise_distortion(source, &out).ok()?;
    ((achieved - delta).abs() <= 1e-9 * delta.max(1e-3)).then_some(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub mean_max_rel_err: f64,
    pub max_max_rel_err: f64,
    pub trials: usize,
}

/// For each δ: random configurations, perturbed to distortion exactly δ,
/// aligned; reports mean and worst `max_rel_err`. Trials are seeded per
/// `(δ index, trial)` and aggregated in trial order.
pub fn delta_to_eps_sweep(
    k: usize,
    dim: usize,
    delta_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if k < 2 || dim == 0 || trials == 0 {
        return Err(invalid("sweep needs k ≥ 2, D ≥ 1 and at least one trial"));
    }
    if delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(invalid("δ values must be finite and non-negative"));
    }
    if delta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("δ grid must be sorted ascending"));
    }
    let require_proper = k <= dim;
    delta_grid
        .iter()
        .enumerate()
        .map(|(di, &delta)| {
            let row_seed = rng::derive_seed(seed, di as u64);
            let errs = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = rng::task_rng(row_seed, t as u64);
                    loop {
                        let source = random_configuration(&mut rng, k, dim);
                        if let Some(target) = perturb_to_distortion(&mut rng, &source, delta) {
                            return procrustes_align(&source, &target, require_proper)
                                .map(|r| r.max_rel_err);
                        }
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow {
                delta,
                mean_max_rel_err: errs.iter().sum::<f64>() / trials as f64,
                max_max_rel_err: errs.iter().fold(0.0f64, |m, e| m.max(*e)),
                trials,
            })
        })
        .collect()
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Point-set CSV: header `dim=D`, then one point per row with `D`
/// comma-separated coordinates.
pub fn write_points<W: Write>(set: &LabeledPointSet, mut out: W) -> Result<()> {
    writeln!(out, "dim={}", set.dim())?;
    for p in set.points() {
        let row: Vec<String> = p.as_slice().iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_points<R: Read>(input: R) -> Result<LabeledPointSet> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty point file".into(),
    })??;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .filter(|d| *d > 0)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("expected header dim=D, got {header:?}"),
        })?;
    let mut points = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line_no = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let coords = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad coordinate: {e}"),
            })?;
        if coords.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {dim} coordinates, got {}", coords.len()),
            });
        }
        points.push(Vector(coords));
    }
    LabeledPointSet::new(points)
}

pub fn save_points(set: &LabeledPointSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_points(set, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_points(path: &Path) -> Result<LabeledPointSet> {
    read_points(File::open(path)?)
}
