//! Numerical thresholds shared by the library and its tests.

/// Maximum Hilbert–Schmidt deviation of `QᵀQ` from the identity for a
/// matrix to count as orthogonal.
pub const ORTHOGONALITY: f64 = 1e-12;

/// Singular values at or below this are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Entrywise tolerance for `S + Sᵀ = 0`.
pub const ANTISYMMETRY: f64 = 1e-12;

/// Results that are exact up to rounding.
pub const EXACT: f64 = 1e-10;

/// Convergence threshold of the one-sided Jacobi sweeps.
pub const JACOBI_CONVERGENCE: f64 = 1e-15;

/// Cap on Jacobi sweeps; small matrices converge in well under 20.
pub const JACOBI_MAX_SWEEPS: usize = 60;

/// Default Monte Carlo sample count per ball.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Default radius of the approximation-lemma fitting ball.
pub const APPROXIMATION_RADIUS: f64 = 10.0;
