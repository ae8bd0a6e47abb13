//! Small dense complex kernels and special functions.

mod bessel;
mod linalg;
mod sampling;

pub use bessel::{bessel_j0, si};
pub(crate) use bessel::j0_unchecked;
pub use linalg::{
    diag_re, frobenius, hermitian_eig, hermitian_part, hermitian_solve, is_hermitian, max_abs,
    psd_clip, real_matrix, trace_re, ComplexMatrix, ComplexVector, EigenDecomposition,
    HERMITIAN_TOL, PSD_CLIP_TOL,
};
pub use sampling::{complex_gaussian, sample_correlated, stream_rng};
