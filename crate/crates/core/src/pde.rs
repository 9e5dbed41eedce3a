//! Grid analogue of the overdetermined system `∂_jΩ_i + ∂_iΩ_j = f_ij`.
//!
//! A vector field sampled on a uniform grid over `[−L, L]^D` is
//! differentiated with second-order finite differences. The constant
//! antisymmetric matrix nearest to its gradient on `B(0, 1)` is compared
//! against the `L²(B(0, 4))` size of the symmetrized gradient, and the
//! exact third-derivative identity
//! `2∂_j∂_kΩ_i = ∂_j f_ik + ∂_k f_ij − ∂_i f_jk` is checked node by node.
//!
//! Ball norms are grid sums over nodes inside the ball weighted by `h^D`,
//! which are accurate to `O(h)` at the ball boundary.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{antisymmetric_part, Matrix};

/// Minimum points per axis for first differences.
pub const MIN_POINTS: usize = 5;
/// Minimum points per axis for the third-derivative identity.
pub const MIN_POINTS_IDENTITY: usize = 9;
/// Minimum half-width, so that `B(0, 4)` fits in the box.
pub const MIN_HALF_WIDTH: f64 = 4.0;
/// Node-count cap; keeps `D ≥ 4` grids from exhausting memory.
pub const MAX_NODES: usize = 1 << 24;

/// Vector field `Ω` sampled on the nodes of `[−L, L]^D`, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    dim: usize,
    half_width: f64,
    points: usize,
    values: Vec<f64>,
}

impl GridField {
    /// Wraps node values laid out node-major, `dim` components per node.
    pub fn from_values(
        dim: usize,
        half_width: f64,
        points: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_shape(dim, half_width, points)?;
        let nodes = points.pow(dim as u32);
        if values.len() != nodes * dim {
            return Err(invalid(format!(
                "grid field needs {} values, got {}",
                nodes * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid field has non-finite values"));
        }
        Ok(GridField {
            dim,
            half_width,
            points,
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn sample<F>(dim: usize, half_width: f64, points: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        validate_shape(dim, half_width, points)?;
        let nodes = points.pow(dim as u32);
        let h = 2.0 * half_width / (points - 1) as f64;
        let per_node: Vec<Vec<f64>> = (0..nodes)
            .into_par_iter()
            .map(|node| {
                let x: Vec<f64> = multi_index(node, dim, points)
                    .iter()
                    .map(|&i| -half_width + i as f64 * h)
                    .collect();
                f(&x)
            })
            .collect();
        let values: Vec<f64> = per_node.into_iter().flatten().collect();
        GridField::from_values(dim, half_width, points, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `i` of `Ω` at `node`.
    pub fn value(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.dim + i]
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let h = self.spacing();
        multi_index(node, self.dim, self.points)
            .iter()
            .map(|&i| -self.half_width + i as f64 * h)
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    /// Scales every value by `s`.
    pub fn scaled(&self, s: f64) -> GridField {
        GridField {
            values: self.values.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }
}

fn validate_shape(dim: usize, half_width: f64, points: usize) -> Result<()> {
    if dim == 0 {
        return Err(invalid("grid dimension must be at least 1"));
    }
    if !(half_width.is_finite() && half_width >= MIN_HALF_WIDTH) {
        return Err(invalid(format!(
            "grid half-width must be at least {MIN_HALF_WIDTH}, got {half_width}"
        )));
    }
    if points < 2 {
        return Err(Error::GridTooCoarse {
            points,
            required: 2,
        });
    }
    let nodes = (points as f64).powi(dim as i32);
    if nodes > MAX_NODES as f64 {
        return Err(invalid(format!(
            "grid with {points}^{dim} nodes exceeds the cap of {MAX_NODES}"
        )));
    }
    Ok(())
}

pub fn multi_index(mut node: usize, dim: usize, points: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    for a in (0..dim).rev() {
        idx[a] = node % points;
        node /= points;
    }
    idx
}

fn flat_index(idx: &[usize], points: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * points + i)
}

/// Gradient `G_ij = ∂Ω_i/∂x_j` at every node: central differences inside,
/// second-order one-sided differences on the faces.
pub fn gradient(field: &GridField) -> Result<Vec<Matrix>> {
    if field.points < MIN_POINTS {
        return Err(Error::GridTooCoarse {
            points: field.points,
            required: MIN_POINTS,
        });
    }
    let (dim, m, h) = (field.dim, field.points, field.spacing());
    Ok((0..field.node_count())
        .into_par_iter()
        .map(|node| {
            let idx = multi_index(node, dim, m);
            let mut g = Matrix::zeros(dim);
            for j in 0..dim {
                let s = field.stride(j);
                for i in 0..dim {
                    let v = |n: usize| field.value(n, i);
                    g[(i, j)] = if idx[j] == 0 {
                        (-3.0 * v(node) + 4.0 * v(node + s) - v(node + 2 * s)) / (2.0 * h)
                    } else if idx[j] == m - 1 {
                        (3.0 * v(node) - 4.0 * v(node - s) + v(node - 2 * s)) / (2.0 * h)
                    } else {
                        (v(node + s) - v(node - s)) / (2.0 * h)
                    };
                }
            }
            g
        })
        .collect())
}

/// `f_ij = ∂_jΩ_i + ∂_iΩ_j` at every node.
#[derive(Clone, Debug)]
pub struct SymmetricData {
    pub f: Vec<Matrix>,
}

pub fn symmetrized_gradient(field: &GridField) -> Result<SymmetricData> {
    let f = gradient(field)?
        .into_par_iter()
        .map(|g| &g + &g.transpose())
        .collect();
    Ok(SymmetricData { f })
}

#[derive(Clone, Debug)]
pub struct PdeApproximation {
    /// Antisymmetric part of the mean gradient over nodes in `B(0, 1)`.
    pub s: Matrix,
    /// `max_ij ‖∂_jΩ_i − S_ij‖_{L²(B(0,1))}`.
    pub residual: f64,
    /// `max_ij ‖f_ij‖_{L²(B(0,4))}`.
    pub hypothesis_norm: f64,
    /// `residual / hypothesis_norm`; `None` in the exact-kernel case where
    /// the symmetrized gradient vanishes.
    pub constant: Option<f64>,
    pub nodes_inside: usize,
}

impl PdeApproximation {
    pub fn exact_kernel(&self) -> bool {
        self.constant.is_none()
    }
}

/// Symmetrized-gradient norms at or below this are the exact-kernel case.
pub const KERNEL_CUTOFF: f64 = 1e-12;

fn ball_nodes(field: &GridField, radius: f64) -> Vec<usize> {
    (0..field.node_count())
        .filter(|&n| field.coords(n).iter().map(|c| c * c).sum::<f64>() <= radius * radius)
        .collect()
}

/// `max_ij (h^D Σ_{nodes} m_ij²)^{1/2}`.
fn max_entry_l2(mats: impl Iterator<Item = Matrix>, dim: usize, weight: f64) -> f64 {
    let mut acc = vec![0.0; dim * dim];
    for m in mats {
        for (a, v) in acc.iter_mut().zip(m.as_slice()) {
            *a += v * v;
        }
    }
    acc.iter()
        .fold(0.0f64, |best, s| best.max((s * weight).sqrt()))
}

/// Constant antisymmetric approximation of `∇Ω` on `B(0, 1)`.
pub fn antisymmetric_approximation(field: &GridField) -> Result<PdeApproximation> {
    let grad = gradient(field)?;
    let dim = field.dim;
    let weight = field.spacing().powi(dim as i32);
    let inner = ball_nodes(field, 1.0);
    if inner.is_empty() {
        return Err(invalid("no grid nodes inside B(0, 1); refine the grid"));
    }
    let mut mean = Matrix::zeros(dim);
    for &n in &inner {
        mean = &mean + &grad[n];
    }
    let s = antisymmetric_part(&mean.scale(1.0 / inner.len() as f64));
    let residual = max_entry_l2(inner.iter().map(|&n| &grad[n] - &s), dim, weight);
    let outer = ball_nodes(field, 4.0);
    let hypothesis_norm = max_entry_l2(
        outer.iter().map(|&n| &grad[n] + &grad[n].transpose()),
        dim,
        weight,
    );
    if !hypothesis_norm.is_finite() {
        return Err(invalid("symmetrized gradient has non-finite L² norm"));
    }
    Ok(PdeApproximation {
        s,
        residual,
        hypothesis_norm,
        constant: (hypothesis_norm > KERNEL_CUTOFF).then(|| residual / hypothesis_norm),
        nodes_inside: inner.len(),
    })
}

/// Largest node residual of `2∂_j∂_kΩ_i = ∂_j f_ik + ∂_k f_ij − ∂_i f_jk`
/// over nodes at least two cells from every face. The left side uses
/// compact second differences, the right side central differences of the
/// discrete `f`, so the residual is a pure `O(h²)` truncation error.
pub fn third_derivative_identity_check(field: &GridField) -> Result<f64> {
    if field.points < MIN_POINTS_IDENTITY {
        return Err(Error::GridTooCoarse {
            points: field.points,
            required: MIN_POINTS_IDENTITY,
        });
    }
    let f = symmetrized_gradient(field)?.f;
    let (dim, m, h) = (field.dim, field.points, field.spacing());
    let interior: Vec<usize> = (0..field.node_count())
        .filter(|&n| multi_index(n, dim, m).iter().all(|&i| i >= 2 && i + 2 < m))
        .collect();
    let worst = interior
        .par_iter()
        .map(|&node| {
            let mut worst = 0.0f64;
            for i in 0..dim {
                let v = |n: usize| field.value(n, i);
                for j in 0..dim {
                    let sj = field.stride(j);
                    for k in 0..dim {
                        let sk = field.stride(k);
                        let second = if j == k {
                            (v(node + sj) - 2.0 * v(node) + v(node - sj)) / (h * h)
                        } else {
                            (v(node + sj + sk) - v(node + sj - sk) - v(node - sj + sk)
                                + v(node - sj - sk))
                                / (4.0 * h * h)
                        };
                        let si = field.stride(i);
                        let d = |s: usize, a: usize, b: usize| {
                            (f[node + s][(a, b)] - f[node - s][(a, b)]) / (2.0 * h)
                        };
                        let rhs = d(sj, i, k) + d(sk, i, j) - d(si, j, k);
                        worst = worst.max((2.0 * second - rhs).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// `Ω_i(x) = Σ_t a_t·sin(ω·k_t·x + φ_t)` with integer wave vectors
/// `|k_t|_∞ ≤ degree` and base frequency `ω`.
#[derive(Clone, Debug)]
pub struct TrigField {
    dim: usize,
    base_frequency: f64,
    /// Per term: (component, amplitude, wave vector, phase).
    terms: Vec<(usize, f64, Vec<i32>, f64)>,
}

impl TrigField {
    /// Three random terms per component.
    pub fn random<R: Rng>(rng: &mut R, dim: usize, degree: i32, base_frequency: f64) -> Self {
        let mut terms = Vec::new();
        for comp in 0..dim {
            for _ in 0..3 {
                let k: Vec<i32> = loop {
                    let k: Vec<i32> = (0..dim)
                        .map(|_| rng.random_range(-degree..=degree))
                        .collect();
                    if k.iter().any(|&v| v != 0) {
                        break k;
                    }
                };
                terms.push((
                    comp,
                    rng.random_range(-1.0..1.0),
                    k,
                    rng.random_range(0.0..std::f64::consts::TAU),
                ));
            }
        }
        TrigField {
            dim,
            base_frequency,
            terms,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (comp, a, k, phase) in &self.terms {
            let arg: f64 =
                k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>() * self.base_frequency;
            out[*comp] += a * (arg + phase).sin();
        }
        out
    }

    /// Analytic `∂Ω_i/∂x_j`.
    pub fn gradient(&self, x: &[f64]) -> Matrix {
        let mut g = Matrix::zeros(self.dim);
        for (comp, a, k, phase) in &self.terms {
            let arg: f64 =
                k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>() * self.base_frequency;
            let c = a * (arg + phase).cos() * self.base_frequency;
            for (j, kj) in k.iter().enumerate() {
                g[(*comp, j)] += c * *kj as f64;
            }
        }
        g
    }

    pub fn on_grid(&self, half_width: f64, points: usize) -> Result<GridField> {
        GridField::sample(self.dim, half_width, points, |x| self.eval(x))
    }
}

fn header_line(field: &GridField) -> String {
    format!(
        "dim={},half_width={:?},points_per_axis={}",
        field.dim, field.half_width, field.points
    )
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, f64, usize)> {
    let mut dim = None;
    let mut half_width = None;
    let mut points = None;
    for part in line.trim().split([',', ' ']).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected key=value in header, got {part:?}"),
        })?;
        let bad = |what: &str| Error::Parse {
            line: line_no,
            message: format!("invalid {what}: {value:?}"),
        };
        match key {
            "dim" => dim = Some(value.parse().map_err(|_| bad("dim"))?),
            "half_width" => half_width = Some(value.parse().map_err(|_| bad("half_width"))?),
            "points_per_axis" => points = Some(value.parse().map_err(|_| bad("points_per_axis"))?),
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("unknown header key {other:?}"),
                })
            }
        }
    }
    match (dim, half_width, points) {
        (Some(d), Some(l), Some(m)) => Ok((d, l, m)),
        _ => Err(Error::Parse {
            line: line_no,
            message: "header must carry dim, half_width and points_per_axis".into(),
        }),
    }
}

/// CSV form: a header `dim=D,half_width=L,points_per_axis=m`, then one row
/// per node with `D` indices followed by `D` values (17 significant digits).
pub fn write_csv<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    writeln!(out, "{}", header_line(field))?;
    for node in 0..field.node_count() {
        let idx = multi_index(node, field.dim, field.points);
        let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        row.extend((0..field.dim).map(|i| format!("{:.16e}", field.value(node, i))));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<GridField> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty grid file".into(),
    })??;
    let (dim, half_width, points) = parse_header(&header, 1)?;
    validate_shape(dim, half_width, points)?;
    let nodes = points.pow(dim as u32);
    let mut values = vec![f64::NAN; nodes * dim];
    let mut seen = vec![false; nodes];
    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 * dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} columns, got {}", 2 * dim, cells.len()),
            });
        }
        let idx = cells[..dim]
            .iter()
            .map(|c| c.parse::<usize>().ok().filter(|&i| i < points))
            .collect::<Option<Vec<usize>>>()
            .ok_or_else(|| Error::Parse {
                line: line_no,
                message: "invalid node index".into(),
            })?;
        let node = flat_index(&idx, points);
        if seen[node] {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate node {idx:?}"),
            });
        }
        seen[node] = true;
        for (i, c) in cells[dim..].iter().enumerate() {
            values[node * dim + i] = c.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid value {c:?}"),
            })?;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(invalid(format!(
            "grid file is missing node {:?}",
            multi_index(missing, dim, points)
        )));
    }
    GridField::from_values(dim, half_width, points, values)
}

/// Binary form: the ASCII line `GRIDFIELD dim=D half_width=L
/// points_per_axis=m` and a newline, then per node `D` little-endian `u32`
/// indices followed by `D` little-endian `f64` values.
pub fn write_binary<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    writeln!(
        out,
        "GRIDFIELD dim={} half_width={:?} points_per_axis={}",
        field.dim, field.half_width, field.points
    )?;
    for node in 0..field.node_count() {
        for i in multi_index(node, field.dim, field.points) {
            out.write_all(&(i as u32).to_le_bytes())?;
        }
        for i in 0..field.dim {
            out.write_all(&field.value(node, i).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(input: R) -> Result<GridField> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    if !header.starts_with("GRIDFIELD ") {
        return Err(Error::Parse {
            line: 1,
            message: "missing GRIDFIELD header".into(),
        });
    }
    let (dim, half_width, points) = parse_header(&header["GRIDFIELD ".len()..], 1)?;
    validate_shape(dim, half_width, points)?;
    let nodes = points.pow(dim as u32);
    let mut values = vec![0.0; nodes * dim];
    let mut buf4 = [0u8; 4];
    let mut buf8 = [0u8; 8];
    for node in 0..nodes {
        let mut idx = Vec::with_capacity(dim);
        for _ in 0..dim {
            reader.read_exact(&mut buf4)?;
            idx.push(u32::from_le_bytes(buf4) as usize);
        }
        if flat_index(&idx, points) != node || idx.iter().any(|&i| i >= points) {
            return Err(invalid(format!(
                "binary grid record {node} has index {idx:?} out of order"
            )));
        }
        for i in 0..dim {
            reader.read_exact(&mut buf8)?;
            values[node * dim + i] = f64::from_le_bytes(buf8);
        }
    }
    GridField::from_values(dim, half_width, points, values)
}

pub fn save(field: &GridField, path: &Path) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "csv") {
        write_csv(field, out)
    } else {
        write_binary(field, out)
    }
}

pub fn load(path: &Path) -> Result<GridField> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        read_csv(file)
    } else {
        read_binary(file)
    }
}
