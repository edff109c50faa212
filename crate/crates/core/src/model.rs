//! Model parameters and overlap constraints.
//!
//! Every functional in this crate is stated for the pure p-spin covariance
//! `ξ(q) = q^p / p`. The inverse temperature is carried separately and enters
//! the functionals as `β²ξ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::tol;

/// A single spherical pure p-spin system: interaction order, inverse
/// temperature and external field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    p: u32,
    beta: f64,
    h: f64,
}

impl ModelSpec {
    pub fn new(p: u32, beta: f64, h: f64) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::invalid(format!("p must be even and >= 2, got {p}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if !h.is_finite() {
            return Err(Error::invalid(format!("h must be finite, got {h}")));
        }
        Ok(Self { p, beta, h })
    }

    /// The 2-spin (SK) model.
    pub fn sk(beta: f64, h: f64) -> Result<Self> {
        Self::new(2, beta, h)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// ξ(q) = q^p / p.
    pub fn xi(&self, q: f64) -> f64 {
        q.powi(self.p as i32) / self.p as f64
    }

    /// ξ'(q) = q^(p-1).
    pub fn xi_prime(&self, q: f64) -> f64 {
        q.powi(self.p as i32 - 1)
    }

    /// ξ''(q) = (p-1) q^(p-2).
    pub fn xi_second(&self, q: f64) -> f64 {
        (self.p - 1) as f64 * q.powi(self.p as i32 - 2)
    }

    /// θ(q) = qξ'(q) − ξ(q) = (1 − 1/p) q^p.
    pub fn theta(&self, q: f64) -> f64 {
        (1.0 - 1.0 / self.p as f64) * q.powi(self.p as i32)
    }

    pub(crate) fn require_p(&self, p: u32, what: &str) -> Result<()> {
        if self.p != p {
            return Err(Error::invalid(format!("{what} requires p = {p}, got p = {}", self.p)));
        }
        Ok(())
    }
}

/// ξ(q) for the given model.
pub fn xi(model: &ModelSpec, q: f64) -> f64 {
    model.xi(q)
}

/// θ(q) = qξ'(q) − ξ(q) for the given model.
pub fn theta(model: &ModelSpec, q: f64) -> f64 {
    model.theta(q)
}

/// Symmetric, unit-diagonal, nonnegative definite matrix of prescribed
/// overlaps between `n` replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    entries: DMatrix<f64>,
}

impl OverlapMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::invalid("overlap matrix must be square and nonempty"));
        }
        let asym = linalg::max_asymmetry(&entries);
        if asym > tol::SYM {
            return Err(Error::NonSymmetric(asym));
        }
        for j in 0..n {
            if (entries[(j, j)] - 1.0).abs() > tol::SYM {
                return Err(Error::invalid(format!(
                    "overlap matrix diagonal entry {j} is {}, expected 1",
                    entries[(j, j)]
                )));
            }
        }
        if entries.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + tol::SYM) {
            return Err(Error::invalid("overlap entries must lie in [-1, 1]"));
        }
        let entries = linalg::symmetrize(&entries);
        if !linalg::psd_check(&entries, tol::PSD)? {
            return Err(Error::invalid("overlap matrix is not nonnegative definite"));
        }
        Ok(Self { entries })
    }

    /// Builds from a row-major list; the dimension is inferred from the length.
    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        let n = (values.len() as f64).sqrt().round() as usize;
        if n * n != values.len() || n == 0 {
            return Err(Error::invalid(format!(
                "{} entries do not form a square matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    /// Two replicas with overlap `u`.
    pub fn pair(u: f64) -> Result<Self> {
        Self::from_row_major(&[1.0, u, u, 1.0])
    }

    /// The three-replica configuration `[[1,q,q],[q,1,-q],[q,-q,1]]`, the only
    /// non-ultrametric arrangement of overlaps `±q`.
    pub fn non_ultrametric(q: f64) -> Result<Self> {
        Self::from_row_major(&[1.0, q, q, q, 1.0, -q, q, -q, 1.0])
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.entries[(j, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        linalg::to_rows(&self.entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_values() {
        let m2 = ModelSpec::new(2, 1.0, 0.0).unwrap();
        let m4 = ModelSpec::new(4, 1.0, 0.0).unwrap();
        assert!((xi(&m2, 0.5) - 0.125).abs() < 1e-15);
        assert!((xi(&m4, 1.0) - 0.25).abs() < 1e-15);
        assert!((xi(&m2, -0.3) - 0.045).abs() < 1e-15);
    }

    #[test]
    fn theta_values() {
        let m2 = ModelSpec::new(2, 1.0, 0.0).unwrap();
        let m4 = ModelSpec::new(4, 1.0, 0.0).unwrap();
        assert!((theta(&m2, 1.0) - 0.5).abs() < 1e-15);
        assert!((theta(&m4, 1.0) - 0.75).abs() < 1e-15);
        assert!((theta(&m2, 0.4) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        assert!(ModelSpec::new(3, 1.0, 0.0).is_err());
        assert!(ModelSpec::new(0, 1.0, 0.0).is_err());
        assert!(ModelSpec::new(2, 0.0, 0.0).is_err());
        assert!(ModelSpec::new(2, -1.0, 0.0).is_err());
        assert!(ModelSpec::new(2, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn xi_even_and_convex_on_grid() {
        for p in [2, 4, 6, 8] {
            let m = ModelSpec::new(p, 1.0, 0.0).unwrap();
            let h = 1e-3;
            for i in 0..=200 {
                let q = -1.0 + i as f64 * 0.01;
                assert_eq!(m.xi(q), m.xi(-q));
                if q.abs() < 1.0 - h {
                    let second = m.xi(q + h) - 2.0 * m.xi(q) + m.xi(q - h);
                    assert!(second >= -1e-15, "p={p} q={q}");
                }
            }
        }
    }

    #[test]
    fn theta_identities() {
        for p in [2, 4, 6] {
            let m = ModelSpec::new(p, 1.0, 0.0).unwrap();
            for i in 0..=20 {
                let q1 = i as f64 / 20.0;
                let lhs = m.theta(q1);
                let rhs = (1.0 - 1.0 / p as f64) * q1 * m.xi_prime(q1);
                assert!((lhs - rhs).abs() < 1e-15);
                for k in 0..=20 {
                    let q2 = k as f64 / 20.0;
                    let geo = m.theta((q1 * q2).sqrt());
                    let prod = (m.theta(q1) * m.theta(q2)).sqrt();
                    assert!((geo - prod).abs() < 1e-14, "p={p} q1={q1} q2={q2}");
                }
            }
        }
    }

    #[test]
    fn overlap_matrix_validation() {
        assert!(OverlapMatrix::pair(0.5).is_ok());
        assert!(OverlapMatrix::from_row_major(&[1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(OverlapMatrix::from_row_major(&[0.9, 0.0, 0.0, 1.0]).is_err());
        assert!(OverlapMatrix::from_row_major(&[1.0, 0.5, 0.5]).is_err());
        assert!(OverlapMatrix::pair(1.2).is_err());
        // q = 0.55 gives smallest eigenvalue 1 - 2q < 0.
        assert!(OverlapMatrix::non_ultrametric(0.55).is_err());
        assert!(OverlapMatrix::non_ultrametric(0.45).is_ok());
    }
}
