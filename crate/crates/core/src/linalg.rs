//! Small dense symmetric positive-definite matrix arithmetic.
//!
//! Vectors are plain `[f64]` slices. [`SpdMatrix`] stores the full `d x d`
//! array row-major; symmetry is restored bit-exactly after every update.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual bound for [`solve_spd`]: `||Ax - b|| <= SOLVE_RESIDUAL_TOL * (1 + ||b||)`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Smallest Cholesky pivot accepted as positive.
pub const PIVOT_FLOOR: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Dense symmetric matrix expected to be positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SpdMatrix {
    /// Builds a matrix from row-major entries. Rejects asymmetric input.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be positive".into()));
        }
        check_dims(dim * dim, entries.len())?;
        if !all_finite(&entries) {
            return Err(Error::NonFiniteInput { context: "SpdMatrix::from_row_major" });
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidParameter(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = scale;
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::scaled_identity(dim, 0.0);
        for (i, v) in diag.iter().enumerate() {
            m.entries[i * dim + i] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.entries.chunks_exact(self.dim).map(|row| dot(row, x)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Replaces each off-diagonal pair by its mean so mirrored entries are bit-equal.
    pub fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (self.entries[i * d + j] + self.entries[j * d + i]);
                self.entries[i * d + j] = m;
                self.entries[j * d + i] = m;
            }
        }
    }

    /// Returns `(P^{-1} + w x x^T)^{-1}` via the Sherman-Morrison identity
    /// `P - w (P x)(P x)^T / (1 + w x^T P x)`.
    pub fn rank_one_downdate(&self, x: &[f64], w: f64) -> Result<SpdMatrix> {
        check_dims(self.dim, x.len())?;
        if !all_finite(x) || !w.is_finite() {
            return Err(Error::NonFiniteInput { context: "rank_one_downdate" });
        }
        if w < 0.0 {
            return Err(Error::InvalidParameter(format!("downdate weight must be >= 0, got {w}")));
        }
        let px = self.mul_vec(x);
        let denom = 1.0 + w * dot(x, &px);
        let scale = w / denom;
        let d = self.dim;
        let mut entries = self.entries.clone();
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] -= scale * px[i] * px[j];
            }
        }
        let mut out = SpdMatrix { dim: d, entries };
        out.symmetrize();
        if !all_finite(&out.entries) {
            return Err(Error::NonFiniteInput { context: "rank_one_downdate result" });
        }
        Ok(out)
    }

    /// In-place `P += w x x^T`, used to accumulate information matrices.
    pub fn add_rank_one(&mut self, x: &[f64], w: f64) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.entries[i * d + j] += w * x[i] * x[j];
            }
        }
        self.symmetrize();
    }

    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_dims(self.dim, x.len())?;
        Ok(dot(x, &self.mul_vec(x)))
    }

    /// Lower-triangular Cholesky factor (row-major), failing on pivots `<= PIVOT_FLOOR`.
    /// Square-root-free `L D L^T` factorization: unit lower `L` (row-major,
    /// strict lower part only) and pivots `D`.
    pub fn ldl(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        let mut piv = vec![0.0; d];
        for j in 0..d {
            let mut dj = self.get(j, j);
            for k in 0..j {
                dj -= l[j * d + k] * l[j * d + k] * piv[k];
            }
            if !(dj > PIVOT_FLOOR) {
                return Err(Error::NotPositiveDefinite { index: j, pivot: dj });
            }
            piv[j] = dj;
            for i in (j + 1)..d {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k] * piv[k];
                }
                l[i * d + j] = s / dj;
            }
        }
        Ok((l, piv))
    }

    pub fn is_spd(&self) -> bool {
        self.is_symmetric() && self.ldl().is_ok()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim, b.len())?;
        let (l, piv) = self.ldl()?;
        let d = self.dim;
        let mut x = b.to_vec();
        for i in 0..d {
            for k in 0..i {
                x[i] -= l[i * d + k] * x[k];
            }
        }
        for i in 0..d {
            x[i] /= piv[i];
        }
        for i in (0..d).rev() {
            for k in (i + 1)..d {
                x[i] -= l[k * d + i] * x[k];
            }
        }
        Ok(x)
    }

    /// Inverse through `d` Cholesky solves.
    pub fn inverse(&self) -> Result<SpdMatrix> {
        let d = self.dim;
        let mut entries = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..d {
                entries[i * d + j] = col[i];
            }
        }
        let mut out = SpdMatrix { dim: d, entries };
        out.symmetrize();
        Ok(out)
    }
}

/// Solves `A x = b` for SPD `A` via `L D L^T`.
pub fn solve_spd(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.solve(b)
}

pub fn rank_one_downdate(p: &SpdMatrix, x: &[f64], w: f64) -> Result<SpdMatrix> {
    p.rank_one_downdate(x, w)
}

pub fn quadratic_form(p: &SpdMatrix, x: &[f64]) -> Result<f64> {
    p.quadratic_form(x)
}

pub fn is_spd(p: &SpdMatrix) -> bool {
    p.is_spd()
}

/// Ascending eigenvalues of the symmetric part of a row-major `dim x dim` matrix.
pub fn symmetric_eigenvalues(dim: usize, row_major: &[f64]) -> Vec<f64> {
    let m = DMatrix::from_row_slice(dim, dim, row_major);
    let sym = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(dim: usize, row_major: &[f64]) -> f64 {
    symmetric_eigenvalues(dim, row_major)[0]
}

pub fn max_eigenvalue(dim: usize, row_major: &[f64]) -> f64 {
    *symmetric_eigenvalues(dim, row_major).last().expect("dim > 0")
}
