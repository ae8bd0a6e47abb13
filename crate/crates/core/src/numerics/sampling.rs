//! Seeded circularly-symmetric complex Gaussian sampling.
//!
//! Sample `i` of a draw is produced by its own ChaCha stream `(seed, i)`, so
//! results do not depend on how the work is split across threads.

use super::linalg::{hermitian_eig, ComplexMatrix, ComplexVector, PSD_CLIP_TOL};
use crate::error::{invalid, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// RNG for one independent sample stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw of CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `count` zero-mean CN vectors with covariance `cov` (after PSD clipping).
pub fn sample_correlated(cov: &ComplexMatrix, count: usize, seed: u64) -> Result<Vec<ComplexVector>> {
    if !cov.is_square() {
        return Err(invalid("sample_correlated: covariance must be square"));
    }
    let n = cov.nrows();
    let eig = hermitian_eig(cov)?.clipped()?;
    // Eigenvalues at roundoff level are dropped so that rank-deficient
    // covariances give exactly rank-deficient samples.
    let floor = PSD_CLIP_TOL * eig.spectral_norm();
    let kept: Vec<usize> = (0..n).filter(|&j| eig.values[j] > floor).collect();
    let mut factor = ComplexMatrix::zeros(n, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        let s = eig.values[src].sqrt();
        for i in 0..n {
            factor[(i, dst)] = eig.vectors[(i, src)] * s;
        }
    }
    let rank = kept.len();
    let samples = (0..count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(seed, idx as u64);
            let w = ComplexVector::from_fn(rank, |_, _| complex_gaussian(&mut rng, 1.0));
            &factor * w
        })
        .collect();
    Ok(samples)
}
