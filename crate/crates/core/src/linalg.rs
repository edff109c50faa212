//! Small dense symmetric-matrix kernels.
//!
//! All matrices handled here are at most 16×16 and O(1)-scaled. The
//! eigensolver is a cyclic Jacobi iteration with a fixed sweep order so the
//! output is reproducible bit for bit.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tol;

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition `M = V diag(λ) Vᵀ` of a symmetric matrix.
///
/// Eigenvalues are ascending; column `i` of `eigenvectors` pairs with
/// `eigenvalues[i]`. In the row-orthogonal convention `M = OᵀΛO` we have
/// `O = Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// `V f(Λ) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = DMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let fk = f(lambda);
            for i in 0..n {
                let vik = v[(i, k)] * fk;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)];
                }
            }
        }
        symmetrize(&out)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.map(|x| x)
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::invalid("eigensolver needs a nonempty square matrix"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let asym = max_asymmetry(m);
    if asym > tol::SYM {
        return Err(Error::NonSymmetric(asym));
    }

    let mut a = symmetrize(m);
    let mut v = DMatrix::<f64>::identity(n, n);

    let mut converged = n == 1;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].abs())
            .sum();
        if off == 0.0 {
            converged = true;
            break;
        }
        let threshold = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let g = 100.0 * apq.abs();
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if apq.abs() <= threshold {
                    continue;
                }
                let diff = aqq - app;
                let t = if diff.abs() + g == diff.abs() {
                    apq / diff
                } else {
                    let theta = 0.5 * diff / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Jacobi eigensolver",
            iterations: MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable: ties keep rotation output order.
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// True iff the smallest eigenvalue of `m` is at least `-tol`.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(sym_eigen(m)?.min() >= -tol)
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse and log-determinant of a symmetric positive definite matrix.
pub fn spd_inverse_logdet(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let chol = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| Error::domain("matrix is not positive definite"))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((symmetrize(&chol.inverse()), logdet))
}

/// `Tr(AB)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Entrywise `w_j w_k m_jk`.
pub fn scale_entries(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |j, k| w[j] * w[k] * m[(j, k)])
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::invalid("ragged or empty matrix"));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(m: &DMatrix<f64>, e: &SymmetricEigen) {
        let n = m.nrows();
        assert!(max_abs_diff(&e.reconstruct(), m) <= tol::RECON);
        let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
        assert!(max_abs_diff(&vtv, &DMatrix::identity(n, n)) <= tol::RECON);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_eigenvalues() {
        let m = DMatrix::<f64>::identity(3, 3);
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        check_invariants(&m, &e);
    }

    #[test]
    fn two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let e = sym_eigen(&m).unwrap();
        assert!((e.eigenvalues[0] - 0.5).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.5).abs() < 1e-14);
        check_invariants(&m, &e);
    }

    #[test]
    fn non_ultrametric_matrix() {
        // Characteristic polynomial of [[1,q,q],[q,1,-q],[q,-q,1]] factors as
        // (λ - 1 - q)² (λ - 1 + 2q).
        let q = 1.0 / 3.0;
        let m = DMatrix::from_row_slice(3, 3, &[1.0, q, q, q, 1.0, -q, q, -q, 1.0]);
        let e = sym_eigen(&m).unwrap();
        let expected = [1.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0];
        for (got, want) in e.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        }
        check_invariants(&m, &e);
    }

    #[test]
    fn psd_examples() {
        assert!(psd_check(&DMatrix::identity(4, 4), tol::PSD).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!psd_check(&m, tol::PSD).unwrap());
        let ex2 = |q: f64| DMatrix::from_row_slice(3, 3, &[1.0, q, q, q, 1.0, -q, q, -q, 1.0]);
        assert!(psd_check(&ex2(0.45), tol::PSD).unwrap());
        assert!(!psd_check(&ex2(0.55), tol::PSD).unwrap());
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(sym_eigen(&m), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn inverse_and_logdet() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (inv, logdet) = spd_inverse_logdet(&m).unwrap();
        assert!((logdet - 1.75f64.ln()).abs() < 1e-14);
        let prod = &m * inv;
        assert!(max_abs_diff(&prod, &DMatrix::identity(2, 2)) < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(spd_inverse_logdet(&bad).is_err());
    }
}
