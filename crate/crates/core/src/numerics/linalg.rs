//! Dense Hermitian kernels on top of `nalgebra`.
//!
//! All matrices handled here are at most one PRB pair (2 x 168) on a side.
//! Solves, pseudo-inverses and PSD clipping all go through the single
//! eigendecomposition kernel [`hermitian_eig`].

use crate::error::{invalid, numeric, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Entrywise Hermitian tolerance, relative to the largest entry magnitude.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_CLIP_TOL * spectral_norm` are clipped to zero.
pub const PSD_CLIP_TOL: f64 = 1e-10;
/// Reciprocal condition number below which a Hermitian solve is refused.
const SINGULAR_RCOND: f64 = 1e-14;
const MAX_QR_ITERATIONS: usize = 100_000;

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
///
/// Every eigenvector is phase-normalised so that its largest-magnitude
/// component (first one on ties) is real and nonnegative.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `U diag(f(lambda)) U^H`.
    pub fn compose(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        let mut out = ComplexMatrix::zeros(n, n);
        out.gemm(
            Complex64::new(1.0, 0.0),
            &scaled,
            &self.vectors.adjoint(),
            Complex64::new(0.0, 0.0),
        );
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.compose(|l| l)
    }

    /// Eigenvalues clipped to `max(0, lambda)`. Fails when any eigenvalue lies
    /// below `-PSD_CLIP_TOL * spectral_norm`.
    pub fn clipped(mut self) -> Result<Self> {
        let floor = -PSD_CLIP_TOL * self.spectral_norm();
        if let Some(bad) = self.values.iter().find(|&&v| v < floor) {
            return Err(invalid(format!(
                "matrix is indefinite: eigenvalue {bad:e} below clipping floor {floor:e}"
            )));
        }
        for v in &mut self.values {
            *v = v.max(0.0);
        }
        Ok(self)
    }

    /// First `n` eigenvector columns (strongest eigenvalues).
    pub fn top_vectors(&self, n: usize) -> ComplexMatrix {
        self.vectors.columns(0, n).into_owned()
    }

    /// Pseudo-inverse treating eigenvalues below `rel_threshold * lambda_max`
    /// as zero.
    pub fn pseudo_inverse(&self, rel_threshold: f64) -> ComplexMatrix {
        let cut = rel_threshold * self.spectral_norm();
        self.compose(|l| if l.abs() > cut && l != 0.0 { 1.0 / l } else { 0.0 })
    }

    pub fn inverse(&self) -> Result<ComplexMatrix> {
        let norm = self.spectral_norm();
        let min = self.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if norm == 0.0 || min <= SINGULAR_RCOND * norm {
            return Err(numeric(format!(
                "singular Hermitian matrix (|lambda| range {min:e}..{norm:e})"
            )));
        }
        Ok(self.compose(|l| 1.0 / l))
    }
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// True when `a` is square and `a(i,j) = conj(a(j,i))` to within `tol`
/// relative to the largest entry.
pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = tol * max_abs(a).max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            if (a[(i, j)] - a[(j, i)].conj()).norm() > scale {
                return false;
            }
        }
    }
    true
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(invalid(format!(
            "hermitian_eig needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("hermitian_eig: non-finite entry"));
    }
    if !is_hermitian(a, HERMITIAN_TOL) {
        return Err(invalid("hermitian_eig: matrix is not Hermitian"));
    }
    let sym = hermitian_part(a);
    let n = sym.nrows();

    let (raw_values, raw_vectors): (Vec<f64>, ComplexMatrix) = if sym.iter().all(|z| z.im == 0.0) {
        let real = sym.map(|z| z.re);
        let eig = real
            .try_symmetric_eigen(f64::EPSILON, MAX_QR_ITERATIONS)
            .ok_or_else(|| numeric("symmetric QR iteration did not converge"))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = sym
            .try_symmetric_eigen(f64::EPSILON, MAX_QR_ITERATIONS)
            .ok_or_else(|| numeric("Hermitian QR iteration did not converge"))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    // stable: ties keep first occurrence
    order.sort_by(|&i, &j| raw_values[j].total_cmp(&raw_values[i]));

    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(raw_values[src]);
        let col = raw_vectors.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, z) in col.iter().enumerate() {
            let m = z.norm();
            if m > best * (1.0 + 1e-12) {
                best = m;
                pivot = i;
            }
        }
        let p = col[pivot];
        let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            vectors[(i, dst)] = col[i] * phase;
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// `A^{-1} B` for Hermitian positive (or negative) definite `A`.
pub fn hermitian_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let inv = hermitian_eig(a)?.inverse()?;
    Ok(inv * b)
}

/// Nearest PSD matrix obtained by clipping small negative eigenvalues.
pub fn psd_clip(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(a)?.clipped()?.reconstruct())
}

pub fn real_matrix(a: &DMatrix<f64>) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn frobenius(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace_re(a: &ComplexMatrix) -> f64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).sum()
}

pub fn diag_re(a: &ComplexMatrix) -> Vec<f64> {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)].re).collect()
}
