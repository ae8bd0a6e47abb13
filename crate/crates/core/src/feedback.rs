//! Rank-reduced CSI feedback: quantisation noise, transmitter-side MSE for
//! redundant and successive feedback, and the resulting `sigma_DL,BS`.
//!
//! The predicted-channel covariance `Phi_pred = Q A^-1 Q^H` with
//! `Q = Phi_hh(N_d)^H S^H` has rank at most `N_ppos`. [`FeedbackModel`] works
//! in an orthonormal basis of `range(Q)`, which turns every `L x L`
//! eigenproblem into an `N_ppos x N_ppos` one. The public functions taking
//! full matrices are the reference form; tests check that both agree.

use crate::channel::{prb_covariance_signed, ChannelProfile, PrbGeometry};
use crate::error::{invalid, Error, Result};
use crate::estimation::{estimation_mse, prediction_filter, MsePerSymbol, PilotStatistics};
use crate::numerics::{hermitian_eig, hermitian_part, psd_clip, ComplexMatrix, EigenDecomposition};
use crate::pilots::{selection_matrix, PilotPattern};
use nalgebra::linalg::QR;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Relative eigenvalue threshold of the pseudo-inverse of the quantised
/// estimate covariance.
pub const PINV_THRESHOLD: f64 = 1e-10;
/// Upper end of the steady-state bisection bracket, in bits.
pub const STEADY_STATE_MAX_BITS: f64 = 64.0;
/// Bracket width, in bits, at which the bisection stops.
pub const STEADY_STATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Every TTI's prediction is quantised on its own.
    #[default]
    Redundant,
    /// Quantisation conditioned on the previously fed-back estimate.
    Successive,
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackMode::Redundant => "redundant",
            FeedbackMode::Successive => "successive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Bits per spatial coefficient per PRB.
    pub n_b: f64,
    pub n_rank: usize,
    /// Feedback delay in TTIs.
    pub n_d: usize,
    pub mode: FeedbackMode,
}

impl FeedbackConfig {
    pub fn validate(&self, geom: &PrbGeometry) -> Result<()> {
        if !(self.n_b >= 0.0 && self.n_b.is_finite()) {
            return Err(invalid(format!("feedback bits must be finite and nonnegative, got {}", self.n_b)));
        }
        if self.n_rank == 0 || self.n_rank > geom.block_len() {
            return Err(invalid(format!(
                "feedback rank must lie in 1..={}, got {}",
                geom.block_len(),
                self.n_rank
            )));
        }
        Ok(())
    }
}

/// Scalar CSI imperfectness figures consumed by the rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsiQuality {
    pub sigma_ul_bs: f64,
    pub sigma_dl_ut: f64,
    pub sigma_dl_bs: f64,
}

/// `2^-max(0, N_b / N_rank - 2)`.
pub fn quantization_scale(n_b: f64, n_rank: usize) -> f64 {
    2f64.powf(-(n_b / n_rank as f64 - 2.0).max(0.0))
}

/// Correlation `beta = sqrt(1 - 2^-max(N_b' / N_rank - 2, 0))` between the
/// channel and its previously fed-back estimate.
pub fn successive_beta(n_b_prev: f64, n_rank: usize) -> f64 {
    (1.0 - quantization_scale(n_b_prev, n_rank)).max(0.0).sqrt()
}

/// Covariance of the predicted channel, `Phi(N_d)^H S^H A^-1 S Phi(N_d)`.
pub fn predicted_covariance(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    n_d: usize,
) -> Result<ComplexMatrix> {
    let stats = PilotStatistics::new(profile, geom, pattern, sigma_p2, n_d)?;
    let w = stats.pilot_rows();
    psd_clip(&hermitian_part(&(w.adjoint() * &stats.inner_inv * w)))
}

/// Eigenvectors of the `n_rank` strongest eigenvalues.
pub fn decorrelation_basis(phi: &ComplexMatrix, n_rank: usize) -> Result<ComplexMatrix> {
    if n_rank == 0 || n_rank > phi.nrows() {
        return Err(invalid(format!("rank {n_rank} outside 1..={}", phi.nrows())));
    }
    Ok(hermitian_eig(phi)?.top_vectors(n_rank))
}

fn project(phi: &ComplexMatrix, v: &ComplexMatrix) -> ComplexMatrix {
    let p = v * v.adjoint();
    hermitian_part(&(&p * phi * &p))
}

/// `Phi_qq = scale * V V^H Phi V V^H`.
pub fn quantization_noise(phi: &ComplexMatrix, v: &ComplexMatrix, n_b: f64, n_rank: usize) -> ComplexMatrix {
    project(phi, v).scale(quantization_scale(n_b, n_rank))
}

/// Eigendecomposition with every negative eigenvalue set to zero.
fn clip_negative(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    let mut eig = hermitian_eig(&hermitian_part(m))?;
    for v in &mut eig.values {
        *v = v.max(0.0);
    }
    Ok(eig)
}

/// Predicted-channel covariance conditioned on the previously fed-back
/// estimate of quality `n_b_prev` (full `L x L` form).
pub fn conditional_covariance(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    n_d: usize,
    n_b_prev: f64,
    n_rank: usize,
) -> Result<ComplexMatrix> {
    if !(n_b_prev >= 0.0 && n_b_prev.is_finite()) {
        return Err(invalid("previous feedback bits must be finite and nonnegative"));
    }
    let phi = predicted_covariance(profile, geom, pattern, sigma_p2, n_d)?;
    let beta = successive_beta(n_b_prev, n_rank);
    if beta == 0.0 {
        return Ok(phi);
    }
    let v = decorrelation_basis(&phi, n_rank)?;
    let gp = prediction_filter(profile, geom, pattern, sigma_p2, n_d)?;
    let s = selection_matrix(pattern);
    let mut obs = &s * prb_covariance_signed(geom, profile, -1) * s.adjoint();
    for i in 0..obs.nrows() {
        obs[(i, i)] += Complex64::new(sigma_p2, 0.0);
    }
    let cross = (&gp * obs * gp.adjoint() * &v * v.adjoint()).scale(beta);
    let m = project(&phi, &v);
    let m_pinv = hermitian_eig(&m)?.pseudo_inverse(PINV_THRESHOLD);
    let cond = &phi - &cross * m_pinv * cross.adjoint();
    Ok(clip_negative(&cond)?.reconstruct())
}

/// `max(0, (max CSIT - max CSIR) / (E - max CSIR))`.
pub fn csit_noise_ratio(mse_csit: &MsePerSymbol, mse_csir: &MsePerSymbol, variance: f64) -> Result<f64> {
    csit_ratio_of(mse_csit.max(), mse_csir.max(), variance)
}

pub(crate) fn csit_ratio_of(csit: f64, csir: f64, variance: f64) -> Result<f64> {
    if variance - csir <= 0.0 {
        return Err(Error::UnusableLink { max_mse: csir, variance });
    }
    Ok(((csit - csir) / (variance - csir)).max(0.0))
}

/// Result of the steady-state search for successive feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Equivalent redundant budget `N_b'` sustained by successive feedback.
    pub bits: f64,
    /// No sign change inside the bracket; `bits` is an endpoint.
    pub degenerate: bool,
}

/// Per-symbol CSIT MSE for one feedback configuration. In successive mode
/// the previous estimate has quality `n_b_prev`.
pub fn csit_mse(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    fb: &FeedbackConfig,
    n_b_prev: f64,
) -> Result<MsePerSymbol> {
    fb.validate(geom)?;
    let model = FeedbackModel::new(profile, geom, pattern, sigma_p2, fb.n_d, fb.n_rank)?;
    let values = match fb.mode {
        FeedbackMode::Redundant => model.redundant_mse(fb.n_b),
        FeedbackMode::Successive => model.successive_mse(n_b_prev, fb.n_b)?,
    };
    Ok(MsePerSymbol { values, lag: fb.n_d })
}

/// Bisection for the `N_b'` at which successive feedback with `fb.n_b` new
/// bits per TTI reproduces its own starting quality.
pub fn steady_state_equivalent_bits(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    fb: &FeedbackConfig,
) -> Result<SteadyState> {
    fb.validate(geom)?;
    let model = FeedbackModel::new(profile, geom, pattern, sigma_p2, fb.n_d, fb.n_rank)?;
    model.steady_state(fb.n_b)
}

/// CSIT MSE in operation: redundant mode uses `N_b` directly, successive
/// mode the redundant MSE at its steady-state equivalent budget.
pub fn operating_csit_mse(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    fb: &FeedbackConfig,
) -> Result<MsePerSymbol> {
    fb.validate(geom)?;
    let model = FeedbackModel::new(profile, geom, pattern, sigma_p2, fb.n_d, fb.n_rank)?;
    Ok(MsePerSymbol { values: model.operating_mse(fb)?, lag: fb.n_d })
}

/// `sigma_DL,BS` for one configuration: operating CSIT MSE against the
/// lag-0 estimation MSE of the same pattern.
pub fn dl_bs_noise(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    fb: &FeedbackConfig,
) -> Result<f64> {
    let csit = operating_csit_mse(profile, geom, pattern, sigma_p2, fb)?;
    let csir = estimation_mse(profile, geom, pattern, sigma_p2, 0)?;
    csit_noise_ratio(&csit, &csir, profile.coeff_variance)
}

/// Feedback quantities of one (profile, pattern, `N_d`, `N_rank`) in the
/// reduced basis `B` of the predicted-channel range. Every `L x L` matrix
/// `M` is represented by the `r x r` matrix `B^H M B`.
pub(crate) struct FeedbackModel {
    basis: ComplexMatrix,
    /// Predicted-channel covariance.
    phi: ComplexMatrix,
    /// Projector onto the strongest `N_rank` eigendirections of `phi`.
    proj: ComplexMatrix,
    /// `G_P (S Phi_hh(-1) S^H + sigma_p^2 I) G_P^H`.
    lagged: ComplexMatrix,
    n_rank: usize,
    variance: f64,
}

impl FeedbackModel {
    pub fn new(
        profile: &ChannelProfile,
        geom: &PrbGeometry,
        pattern: &PilotPattern,
        sigma_p2: f64,
        n_d: usize,
        n_rank: usize,
    ) -> Result<Self> {
        if n_rank == 0 || n_rank > geom.block_len() {
            return Err(invalid(format!("rank {n_rank} outside 1..={}", geom.block_len())));
        }
        let stats = PilotStatistics::new(profile, geom, pattern, sigma_p2, n_d)?;
        let q = stats.pilot_rows().adjoint();
        let qr = QR::new(q);
        let basis = qr.q();
        let r = qr.r();
        let a_inv = &stats.inner_inv;
        let phi = hermitian_part(&(&r * a_inv * r.adjoint()));

        let eig = clip_negative(&phi)?;
        let top = eig.top_vectors(n_rank.min(eig.dim()));
        let proj = &top * top.adjoint();

        let idx = &stats.indices;
        let back = prb_covariance_signed(geom, profile, -1);
        let mut obs = ComplexMatrix::from_fn(idx.len(), idx.len(), |i, j| back[(idx[i], idx[j])]);
        for i in 0..idx.len() {
            obs[(i, i)] += Complex64::new(sigma_p2, 0.0);
        }
        let gain = &r * a_inv;
        let lagged = &gain * obs * gain.adjoint();

        Ok(Self { basis, phi, proj, lagged, n_rank, variance: stats.variance })
    }

    /// `E - diag(B K B^H)`, clamped to `[0, E]`.
    fn mse_from_known(&self, known: &ComplexMatrix) -> Vec<f64> {
        let t = &self.basis * known;
        (0..self.basis.nrows())
            .map(|l| {
                let d: f64 = (0..self.basis.ncols())
                    .map(|i| (t[(l, i)] * self.basis[(l, i)].conj()).re)
                    .sum();
                (self.variance - d).clamp(0.0, self.variance)
            })
            .collect()
    }

    #[cfg(test)]
    pub fn predicted_full(&self) -> ComplexMatrix {
        &self.basis * &self.phi * self.basis.adjoint()
    }

    #[cfg(test)]
    pub fn prediction_mse(&self) -> Vec<f64> {
        self.mse_from_known(&self.phi)
    }

    pub fn redundant_mse(&self, n_b: f64) -> Vec<f64> {
        let s = quantization_scale(n_b, self.n_rank);
        let known = (&self.proj * &self.phi * &self.proj).scale(1.0 - s);
        self.mse_from_known(&known)
    }

    pub fn conditional(&self, n_b_prev: f64) -> Result<EigenDecomposition> {
        let beta = successive_beta(n_b_prev, self.n_rank);
        if beta == 0.0 {
            return clip_negative(&self.phi);
        }
        let cross = (&self.lagged * &self.proj).scale(beta);
        let m = hermitian_part(&(&self.proj * &self.phi * &self.proj));
        let m_pinv = hermitian_eig(&m)?.pseudo_inverse(PINV_THRESHOLD);
        clip_negative(&(&self.phi - &cross * m_pinv * cross.adjoint()))
    }

    #[cfg(test)]
    pub fn conditional_full(&self, n_b_prev: f64) -> Result<ComplexMatrix> {
        let c = self.conditional(n_b_prev)?.reconstruct();
        Ok(&self.basis * c * self.basis.adjoint())
    }

    /// Knowledge from the previous estimate plus the quantised innovation.
    pub fn successive_mse(&self, n_b_prev: f64, n_b: f64) -> Result<Vec<f64>> {
        let eig = self.conditional(n_b_prev)?;
        let cond = eig.reconstruct();
        let top = eig.top_vectors(self.n_rank.min(eig.dim()));
        let p = &top * top.adjoint();
        let s = quantization_scale(n_b, self.n_rank);
        let known = (&self.phi - &cond) + (&p * &cond * &p).scale(1.0 - s);
        Ok(self.mse_from_known(&known))
    }

    pub fn steady_state(&self, n_b: f64) -> Result<SteadyState> {
        let max = |v: Vec<f64>| v.into_iter().fold(0.0_f64, f64::max);
        let g = |x: f64| -> Result<f64> {
            Ok(max(self.successive_mse(x, n_b)?) - max(self.redundant_mse(x)))
        };
        // the MSE curves flatten at large budgets, so only the bracket
        // width decides convergence
        let (mut lo, mut hi) = (n_b, STEADY_STATE_MAX_BITS.max(n_b));
        let g_lo = g(lo)?;
        if g_lo == 0.0 {
            return Ok(SteadyState { bits: lo, degenerate: false });
        }
        let g_hi = g(hi)?;
        if g_lo.signum() == g_hi.signum() {
            let bits = if g_lo < 0.0 { hi } else { lo };
            log::debug!("steady state: no sign change on [{lo}, {hi}] (g = {g_lo:e}, {g_hi:e})");
            return Ok(SteadyState { bits, degenerate: true });
        }
        let lo_negative = g_lo < 0.0;
        while hi - lo > STEADY_STATE_TOL {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid)?;
            if gm == 0.0 {
                return Ok(SteadyState { bits: mid, degenerate: false });
            }
            if (gm < 0.0) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(SteadyState { bits: 0.5 * (lo + hi), degenerate: false })
    }

    pub fn operating_mse(&self, fb: &FeedbackConfig) -> Result<Vec<f64>> {
        match fb.mode {
            FeedbackMode::Redundant => Ok(self.redundant_mse(fb.n_b)),
            FeedbackMode::Successive => {
                let ss = self.steady_state(fb.n_b)?;
                Ok(self.redundant_mse(ss.bits))
            }
        }
    }
}
