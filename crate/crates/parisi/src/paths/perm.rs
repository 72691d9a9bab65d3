//! Permutation-invariant D x D matrices in eigenvalue coordinates.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// The matrix `m(l1, l2) = l1 (id_D - 1_D/D) + l2 1_D/D`: the unique
/// permutation-invariant matrix with eigenvalue `l1` (multiplicity D-1) and
/// `l2` (multiplicity 1, eigenvector the all-ones direction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermMatrix {
    d: usize,
    lambda1: f64,
    lambda2: f64,
}

impl PermMatrix {
    pub fn new(d: usize, lambda1: f64, lambda2: f64) -> PermMatrix {
        assert!(d >= 2, "PermMatrix requires D >= 2");
        PermMatrix { d, lambda1, lambda2 }
    }

    /// From the diagonal entry `a` and off-diagonal entry `t`:
    /// `l1 = a - t`, `l2 = a - t + D t`.
    pub fn from_entries(a: f64, t: f64, d: usize) -> PermMatrix {
        PermMatrix::new(d, a - t, a - t + d as f64 * t)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Diagonal entry `a = (l2 + (D-1) l1) / D`.
    pub fn diag_entry(&self) -> f64 {
        (self.lambda2 + (self.d as f64 - 1.0) * self.lambda1) / self.d as f64
    }

    /// Off-diagonal entry `t = (l2 - l1) / D`.
    pub fn offdiag_entry(&self) -> f64 {
        (self.lambda2 - self.lambda1) / self.d as f64
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let a = self.diag_entry();
        let t = self.offdiag_entry();
        DMatrix::from_fn(self.d, self.d, |i, j| if i == j { a } else { t })
    }

    /// Recovers eigenvalue coordinates from a dense matrix; errors when the
    /// matrix is not permutation-invariant within `tol` (maximum deviation
    /// of diagonal entries from their mean, and of off-diagonal entries from
    /// theirs).
    pub fn from_dense(m: &DMatrix<f64>, tol: f64) -> Result<PermMatrix> {
        let d = m.nrows();
        if d < 2 || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: d.min(m.ncols()),
            });
        }
        let deviation = permutation_deviation(m);
        if deviation > tol {
            return Err(Error::NotPermutationInvariant {
                level: 0,
                deviation,
            });
        }
        let mut diag_mean = 0.0;
        let mut off_mean = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    diag_mean += m[(i, j)];
                } else {
                    off_mean += m[(i, j)];
                }
            }
        }
        diag_mean /= d as f64;
        off_mean /= (d * (d - 1)) as f64;
        Ok(PermMatrix::from_entries(diag_mean, off_mean, d))
    }

    /// PSD iff both eigenvalues are nonnegative.
    pub fn is_psd(&self, tol: f64) -> bool {
        self.lambda1 >= -tol && self.lambda2 >= -tol
    }

    /// Frobenius pairing: `m(l) . m(u) = (D-1) l1 u1 + l2 u2`.
    pub fn frobenius_dot(&self, other: &PermMatrix) -> f64 {
        assert_eq!(self.d, other.d);
        (self.d as f64 - 1.0) * self.lambda1 * other.lambda1 + self.lambda2 * other.lambda2
    }

    /// Spectral square root `m(sqrt(l1), sqrt(l2))`; requires PSD input with
    /// the usual clipping tolerance.
    pub fn sqrt(&self) -> Result<PermMatrix> {
        if !self.is_psd(1e-10) {
            return Err(Error::NonPsdInput {
                min_eig: self.lambda1.min(self.lambda2),
            });
        }
        Ok(PermMatrix::new(
            self.d,
            self.lambda1.max(0.0).sqrt(),
            self.lambda2.max(0.0).sqrt(),
        ))
    }
}

/// Max deviation of diagonal entries from their mean and of off-diagonal
/// entries from theirs; zero exactly when the matrix is permutation
/// invariant.
pub fn permutation_deviation(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let mut diag_mean = 0.0;
    let mut off_mean = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag_mean += m[(i, j)];
            } else {
                off_mean += m[(i, j)];
            }
        }
    }
    diag_mean /= d as f64;
    off_mean /= (d * (d - 1)).max(1) as f64;
    let mut dev: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { diag_mean } else { off_mean };
            dev = dev.max((m[(i, j)] - target).abs());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_formulas() {
        // (a, t) = (1, 0) is the identity.
        let m = PermMatrix::from_entries(1.0, 0.0, 3);
        assert_eq!((m.lambda1(), m.lambda2()), (1.0, 1.0));
        // (a, t) = (2, 1) at D = 3.
        let m = PermMatrix::from_entries(2.0, 1.0, 3);
        assert_eq!((m.lambda1(), m.lambda2()), (1.0, 4.0));
        // (a, t) = (1/D, 1/D) is the rank-one all-ones matrix over D.
        let d = 4;
        let m = PermMatrix::from_entries(1.0 / d as f64, 1.0 / d as f64, d);
        assert!((m.lambda1() - 0.0).abs() < 1e-15);
        assert!((m.lambda2() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_round_trip() {
        for d in [2usize, 3, 5] {
            let m = PermMatrix::new(d, 0.3, 1.7);
            let back = PermMatrix::from_dense(&m.to_dense(), 1e-12).unwrap();
            assert!((back.lambda1() - 0.3).abs() < 1e-12);
            assert!((back.lambda2() - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_invariant() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(
            PermMatrix::from_dense(&m, 1e-12),
            Err(Error::NotPermutationInvariant { .. })
        ));
    }

    #[test]
    fn pairing_matches_dense() {
        let a = PermMatrix::new(3, 0.5, 2.0);
        let b = PermMatrix::new(3, 1.5, 0.25);
        let dense: f64 = (a.to_dense().component_mul(&b.to_dense())).sum();
        assert!((a.frobenius_dot(&b) - dense).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = PermMatrix::new(2, 0.49, 4.0);
        let r = m.sqrt().unwrap();
        let sq = &r.to_dense() * &r.to_dense();
        let dev = (&sq - m.to_dense()).norm();
        assert!(dev < 1e-12);
    }
}
