#![allow(dead_code)]

use distortion_lab::pde::{antisymmetric_approximation, TrigField};
use distortion_lab::rng;
use rand::Rng;

/// Frequency unit of the random trigonometric fields.
pub const BASE_FREQUENCY: f64 = std::f64::consts::PI / 5.0;

/// Largest residual/hypothesis ratio of the oracle ensemble (seed 7_000,
/// 100 fields), times 1.25.
pub const C_EMP: f64 = 3.1519e-1;

/// Field `i` of an ensemble: D alternates 2, 3; degree uniform in 1..=3.
pub fn ensemble_field(seed: u64, i: usize) -> TrigField {
    let mut r = rng::task_rng(seed, i as u64);
    let dim = 2 + i % 2;
    let degree = r.random_range(1..=3);
    TrigField::random(&mut r, dim, degree, BASE_FREQUENCY)
}

pub fn grid_points(dim: usize) -> usize {
    if dim == 2 {
        65
    } else {
        33
    }
}

/// Residual/hypothesis ratios and `max |S + Sᵀ|` of `count` ensemble fields.
pub fn pde_ensemble(seed: u64, count: usize) -> Vec<(f64, f64)> {
    (0..count)
        .map(|i| {
            let tf = ensemble_field(seed, i);
            let dim = 2 + i % 2;
            let grid = tf.on_grid(5.0, grid_points(dim)).unwrap();
            let a = antisymmetric_approximation(&grid).unwrap();
            let skew = (&a.s + &a.s.transpose()).max_abs();
            (
                a.constant.expect("generated fields are not in the kernel"),
                skew,
            )
        })
        .collect()
}
