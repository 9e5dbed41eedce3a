//! Numerical laboratory for ε-distorted diffeomorphisms of `R^D`.
//!
//! The crate measures how well the Jacobian of an almost-isometric map is
//! approximated by a single orthogonal matrix on a ball, in mean, in fourth
//! moment and in measure, and provides the supporting machinery: small
//! dense linear algebra, Monte Carlo over balls, the slow-twist family of
//! maps, a grid version of the symmetrized-gradient system, and labelled
//! point-set alignment. The `distortion-lab` binary drives all of it from
//! flat key-value configuration files.

pub mod align;
pub mod ball;
pub mod bmo;
pub mod config;
pub mod error;
pub mod linalg;
pub mod maps;
pub mod pde;
pub mod report;
pub mod rng;
pub mod run;
pub mod tolerances;

pub use error::{Error, Result};
pub use linalg::{EuclideanMotion, Matrix, Vector};
