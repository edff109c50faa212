//! Numerical toolkit for spherical pure p-spin spin glasses.
//!
//! The crate evaluates and minimizes the single-system free-energy functionals
//! (Parisi and Crisanti–Sommers forms), evaluates Guerra-style upper bounds on
//! the free energy of several coupled replicas with constrained overlaps, and
//! runs exact-spectrum Monte Carlo for the 2-spin model to check the overlap
//! predictions those bounds imply.
//!
//! Module map:
//!
//! * [`model`]: model parameters, ξ and θ, overlap constraint matrices.
//! * [`linalg`]: Jacobi eigensolver and the small symmetric-matrix helpers.
//! * [`optim`]: scalar root finding and derivative-free minimization.
//! * [`parisi`]: single-system functionals and their fixed-point equations.
//! * [`bounds`]: coupled-replica bounds, exclusion verdicts, chaos analysis.
//! * [`simulator`]: disorder sampling and sphere-preserving Metropolis chains.
//! * [`cli`]: the command-line surface and its output records.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod parisi;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{ModelSpec, OverlapMatrix};

/// Numerical tolerances shared across modules.
pub mod tol {
    /// Maximum absolute asymmetry accepted by the eigensolver.
    pub const SYM: f64 = 1e-12;
    /// Smallest eigenvalue accepted as nonnegative.
    pub const PSD: f64 = 1e-10;
    /// Reconstruction and orthogonality tolerance of eigendecompositions.
    pub const RECON: f64 = 1e-10;
    /// Residual tolerance for scalar root finding.
    pub const ROOT: f64 = 1e-12;
    /// Tolerance on the critical-point identities of the p-spin functional.
    pub const IDENTITY: f64 = 1e-10;
    /// Projected-gradient tolerance of the variational minimizer.
    pub const GRAD: f64 = 1e-6;
    /// Threshold for "the supremum is zero".
    pub const ZERO: f64 = 1e-12;
    /// Iteration budget for every iterative method.
    pub const MAX_ITER: usize = 10_000;
    /// Absolute margin used when declaring a constraint excluded.
    pub const EXCLUSION_MARGIN: f64 = 1e-8;
}
