//! Dense generalized eigendecompositions and fractional norms.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Result, VmsError};
use crate::fe::SparseOperator;

/// Largest operator handled by the dense eigensolvers.
pub const DENSE_CAP: usize = 3000;

/// `K v = lambda M v` with ascending eigenvalues and M-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub tag: String,
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors.
    pub eigenvectors: Mat<f64>,
    /// `M V`, so that modal coefficients of `w` are `(M V)^T w`.
    pub mass_modes: Mat<f64>,
}

pub(crate) fn par() -> Par {
    Par::Seq
}

/// Generalized symmetric eigenproblem for dense matrices.
pub fn decompose_dense(tag: &str, k: MatRef<'_, f64>, m: MatRef<'_, f64>, cap: usize) -> Result<Spectrum> {
    let n = k.nrows();
    if n > cap {
        return Err(VmsError::Size { size: n, cap });
    }
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(VmsError::Input("eigenproblem matrices must be square and of equal size".into()));
    }
    let llt = m
        .llt(Side::Lower)
        .map_err(|_| VmsError::Input(format!("{tag}: mass matrix is not positive definite")))?;
    let l = llt.L();
    let mut x = k.to_owned();
    solve_lower_triangular_in_place(l, x.as_mut(), par());
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), par());
    let sym = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| VmsError::Solver(format!("{tag}: eigensolver failed: {e:?}")))?;
    let eigenvalues: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let mut v = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), v.as_mut(), par());
    let mass_modes = m * &v;
    Ok(Spectrum {
        tag: tag.to_string(),
        eigenvalues,
        eigenvectors: v,
        mass_modes,
    })
}

/// Spectrum of `(K, M)` for sparse operators (densified, capped).
pub fn spectral_decompose(k: &SparseOperator, m: &SparseOperator) -> Result<Spectrum> {
    spectral_decompose_capped(k, m, DENSE_CAP)
}

pub fn spectral_decompose_capped(k: &SparseOperator, m: &SparseOperator, cap: usize) -> Result<Spectrum> {
    if k.rows > cap {
        return Err(VmsError::Size { size: k.rows, cap });
    }
    decompose_dense("sparse", k.to_dense().as_ref(), m.to_dense().as_ref(), cap)
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Modal coefficients `v_i^T M w`.
    pub fn coefficients(&self, w: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(w.len(), n);
        (0..n)
            .map(|i| (0..n).map(|r| self.mass_modes[(r, i)] * w[r]).sum())
            .collect()
    }

    /// `lambda^s`, where non-positive eigenvalues only count for `s = 0`.
    pub fn power(&self, i: usize, s: f64) -> f64 {
        let l = self.eigenvalues[i];
        if s == 0.0 {
            1.0
        } else if l <= 0.0 {
            0.0
        } else {
            l.powf(s)
        }
    }

    /// Dense `M V diag(lambda^s) V^T M`, the Gram matrix of the s-norm.
    pub fn gram(&self, s: f64) -> Mat<f64> {
        let n = self.len();
        let scaled = Mat::<f64>::from_fn(n, n, |r, i| self.mass_modes[(r, i)] * self.power(i, s));
        &scaled * self.mass_modes.transpose()
    }

    /// Dense `V diag(lambda^-s) V^T` (inverse of [`Spectrum::gram`] for
    /// positive spectra).
    pub fn inverse_gram(&self, s: f64) -> Mat<f64> {
        let n = self.len();
        let scaled = Mat::<f64>::from_fn(n, n, |r, i| self.eigenvectors[(r, i)] * self.power(i, -s));
        &scaled * self.eigenvectors.transpose()
    }
}

/// `(sum_i lambda_i^s (v_i^T M w)^2)^(1/2)`.
pub fn fractional_norm(w: &[f64], s: f64, spec: &Spectrum) -> f64 {
    spec.coefficients(w)
        .iter()
        .enumerate()
        .map(|(i, c)| spec.power(i, s) * c * c)
        .sum::<f64>()
        .sqrt()
}
