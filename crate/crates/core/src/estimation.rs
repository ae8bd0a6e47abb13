//! Per-PRB MMSE channel estimation and prediction, and the reduction of
//! per-symbol MSE to scalar noise ratios.

use crate::channel::{prb_covariance, ChannelProfile, PrbGeometry};
use crate::error::{invalid, Error, Result};
use crate::numerics::{hermitian_eig, hermitian_part, ComplexMatrix};
use crate::pilots::{selection_matrix, PilotPattern};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Per-resource-element MSE of a PRB, in units of `E{|h|^2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MsePerSymbol {
    pub values: Vec<f64>,
    /// Prediction lag in TTIs (0 for plain estimation).
    pub lag: usize,
}

impl MsePerSymbol {
    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v))
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn reduce(&self, reduction: Reduction) -> f64 {
        match reduction {
            Reduction::Max => self.max(),
            Reduction::Mean => self.mean(),
        }
    }
}

/// How a per-symbol MSE vector is collapsed to one representative value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Worst symbol dominates the error rate.
    #[default]
    Max,
    Mean,
}

/// Relative estimation noise power `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EstimationNoise(pub f64);

/// Source of the uplink estimation noise at the base station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UplinkNoiseModel {
    /// Per-PRB MMSE estimation with the uplink pilot pattern.
    #[default]
    Mmse,
    /// `sigma_UL^2 / (N_pilots * p_pilot)`.
    CramerRao,
}

/// `cross S^H (S phi0 S^H + sigma_p^2 I)^-1`.
///
/// `cross` is the covariance between the channel to be estimated and the
/// channel at the pilot block: `phi0` itself for estimation, and
/// `E{h[t+N_d] h[t]^H}` for prediction `N_d` blocks ahead.
pub fn mmse_filter(phi0: &ComplexMatrix, cross: &ComplexMatrix, s: &ComplexMatrix, sigma_p2: f64) -> Result<ComplexMatrix> {
    let l = phi0.nrows();
    if !phi0.is_square() || cross.shape() != (l, l) || s.ncols() != l || s.nrows() == 0 {
        return Err(invalid(format!(
            "mmse_filter: inconsistent shapes phi0 {:?}, cross {:?}, S {:?}",
            phi0.shape(),
            cross.shape(),
            s.shape()
        )));
    }
    if !(sigma_p2 >= 0.0 && sigma_p2.is_finite()) {
        return Err(invalid("pilot noise power must be finite and nonnegative"));
    }
    let sh = s.adjoint();
    let mut inner = hermitian_part(&(s * phi0 * &sh));
    for i in 0..inner.nrows() {
        inner[(i, i)] += Complex64::new(sigma_p2, 0.0);
    }
    let inv = hermitian_eig(&inner)?.inverse()?;
    Ok(cross * sh * inv)
}

/// Pilot-side quantities shared by estimation, prediction and feedback.
pub(crate) struct PilotStatistics {
    pub indices: Vec<usize>,
    /// `(S Phi(0) S^H + sigma_p^2 I)^-1`.
    pub inner_inv: ComplexMatrix,
    /// `Phi_hh(N_d)` as computed by the channel module.
    pub phi_lag: ComplexMatrix,
    pub variance: f64,
}

impl PilotStatistics {
    pub fn new(profile: &ChannelProfile, geom: &PrbGeometry, pattern: &PilotPattern, sigma_p2: f64, n_d: usize) -> Result<Self> {
        if pattern.geometry != *geom {
            return Err(invalid("pilot pattern was built for a different PRB geometry"));
        }
        if pattern.n_pilots() == 0 {
            return Err(invalid("pilot pattern is empty"));
        }
        if !(sigma_p2 >= 0.0 && sigma_p2.is_finite()) {
            return Err(invalid("pilot noise power must be finite and nonnegative"));
        }
        let phi0 = prb_covariance(geom, profile, 0)?;
        let phi_lag = if n_d == 0 { phi0.clone() } else { prb_covariance(geom, profile, n_d as i64)? };
        let indices = pattern.indices();
        let n = indices.len();
        let mut inner = ComplexMatrix::from_fn(n, n, |i, j| phi0[(indices[i], indices[j])]);
        for i in 0..n {
            inner[(i, i)] += Complex64::new(sigma_p2, 0.0);
        }
        let inner_inv = hermitian_eig(&hermitian_part(&inner))?.inverse()?;
        Ok(Self { indices, inner_inv, phi_lag, variance: profile.coeff_variance })
    }

    /// `S Phi_hh(N_d)`: the pilot rows of the lagged covariance (`N_ppos x L`).
    pub fn pilot_rows(&self) -> ComplexMatrix {
        let l = self.phi_lag.ncols();
        ComplexMatrix::from_fn(self.indices.len(), l, |i, j| self.phi_lag[(self.indices[i], j)])
    }

    /// `E 1 - diag(W^H A^-1 W)` with `W = S Phi_hh(N_d)`, clamped at 0.
    pub fn prediction_mse(&self) -> Vec<f64> {
        let w = self.pilot_rows();
        let x = &self.inner_inv * &w;
        (0..w.ncols())
            .map(|l| {
                let explained: f64 = (0..w.nrows()).map(|i| (w[(i, l)].conj() * x[(i, l)]).re).sum();
                (self.variance - explained).max(0.0)
            })
            .collect()
    }
}

/// Per-symbol MSE of the MMSE estimate (`n_d = 0`) or of the prediction
/// `n_d` blocks ahead.
pub fn estimation_mse(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    n_d: usize,
) -> Result<MsePerSymbol> {
    let stats = PilotStatistics::new(profile, geom, pattern, sigma_p2, n_d)?;
    Ok(MsePerSymbol { values: stats.prediction_mse(), lag: n_d })
}

/// Predictor `G_P` mapping pilot observations at block `t` to the channel of
/// block `t + n_d` (`L x N_ppos`).
pub fn prediction_filter(
    profile: &ChannelProfile,
    geom: &PrbGeometry,
    pattern: &PilotPattern,
    sigma_p2: f64,
    n_d: usize,
) -> Result<ComplexMatrix> {
    let phi0 = prb_covariance(geom, profile, 0)?;
    let cross = prb_covariance(geom, profile, n_d as i64)?.adjoint();
    mmse_filter(&phi0, &cross, &selection_matrix(pattern), sigma_p2)
}

/// `max(MSE) / (E - max(MSE))`.
pub fn noise_ratio(mse: &MsePerSymbol, variance: f64) -> Result<EstimationNoise> {
    noise_ratio_with(mse, variance, Reduction::Max)
}

pub fn noise_ratio_with(mse: &MsePerSymbol, variance: f64, reduction: Reduction) -> Result<EstimationNoise> {
    ratio_of(mse.reduce(reduction), variance)
}

pub(crate) fn ratio_of(rep: f64, variance: f64) -> Result<EstimationNoise> {
    if !(variance > 0.0 && variance.is_finite()) || !rep.is_finite() {
        return Err(invalid("noise_ratio needs a positive channel variance and a finite MSE"));
    }
    if rep >= variance {
        return Err(Error::UnusableLink { max_mse: rep, variance });
    }
    Ok(EstimationNoise(rep.max(0.0) / (variance - rep)))
}

/// Uplink estimation noise from the Cramér-Rao bound of a least-squares
/// estimate over `n_pilots` pilots of power `pilot_power`.
pub fn cramer_rao_noise(sigma_ul2: f64, n_pilots: usize, pilot_power: f64) -> Result<EstimationNoise> {
    if n_pilots == 0 || !(pilot_power > 0.0) || !(sigma_ul2 >= 0.0) {
        return Err(invalid("Cramér-Rao noise needs pilots with positive power"));
    }
    Ok(EstimationNoise(sigma_ul2 / (n_pilots as f64 * pilot_power)))
}
