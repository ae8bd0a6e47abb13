//! WSSUS channel statistics over one physical resource block (PRB) and
//! channel-realisation sampling.
//!
//! Channel vectors of a PRB are stacked symbol-major: the entry for OFDM
//! symbol `s` and subcarrier `c` sits at `s * n_subcarriers + c`. With this
//! order the PRB covariance is exactly `E|h|^2 * (Pi_T kron Pi_F)`.

use crate::error::{invalid, Result};
use crate::numerics::{
    complex_gaussian, j0_unchecked, sample_correlated, si, stream_rng, ComplexMatrix, ComplexVector,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Time/frequency layout of one PRB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrbGeometry {
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    /// OFDM symbol rate in Hz.
    pub symbol_rate: f64,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
}

impl Default for PrbGeometry {
    fn default() -> Self {
        Self {
            n_symbols: 14,
            n_subcarriers: 12,
            symbol_rate: 14_000.0,
            subcarrier_spacing: 15_000.0,
        }
    }
}

impl PrbGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 || self.n_subcarriers == 0 {
            return Err(invalid("PRB geometry needs at least one symbol and one subcarrier"));
        }
        if !(self.symbol_rate > 0.0 && self.symbol_rate.is_finite())
            || !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite())
        {
            return Err(invalid("symbol rate and subcarrier spacing must be positive"));
        }
        Ok(())
    }

    /// Number of resource elements `L = N_s * N_c`.
    pub fn block_len(&self) -> usize {
        self.n_symbols * self.n_subcarriers
    }

    pub fn stacked_index(&self, symbol: usize, subcarrier: usize) -> usize {
        symbol * self.n_subcarriers + subcarrier
    }
}

/// Fading statistics of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub carrier_freq: f64,
    /// Terminal speed in m/s.
    pub velocity: f64,
    /// Maximum delay spread in s.
    pub tau_max: f64,
    /// `E{|h|^2}`.
    pub coeff_variance: f64,
}

impl ChannelProfile {
    /// Builds a profile from the units used at the configuration boundary.
    pub fn from_kmh(carrier_freq: f64, velocity_kmh: f64, tau_max_us: f64) -> Self {
        Self {
            carrier_freq,
            velocity: velocity_kmh / 3.6,
            tau_max: tau_max_us * 1e-6,
            coeff_variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return Err(invalid("carrier frequency must be positive"));
        }
        if !(self.coeff_variance > 0.0 && self.coeff_variance.is_finite()) {
            return Err(invalid("channel coefficient variance must be positive"));
        }
        if !(self.velocity >= 0.0 && self.velocity.is_finite()) {
            return Err(invalid("velocity must be nonnegative"));
        }
        if !(self.tau_max >= 0.0 && self.tau_max.is_finite()) {
            return Err(invalid("delay spread must be nonnegative"));
        }
        Ok(())
    }

    pub fn velocity_kmh(&self) -> f64 {
        self.velocity * 3.6
    }

    /// Maximum Doppler frequency `f_c v / c` in Hz.
    pub fn doppler(&self) -> f64 {
        self.carrier_freq * self.velocity / SPEED_OF_LIGHT
    }
}

/// One uplink and one downlink channel matrix, both `N_BS x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_ul: ComplexMatrix,
    pub h_dl: ComplexMatrix,
}

/// `Pi_T(lag)`; entry `(i, j)` is `J0(2 pi f_D (lag N_s + j - i) / f_s)`.
pub fn temporal_correlation(geom: &PrbGeometry, profile: &ChannelProfile, lag: i64) -> Result<ComplexMatrix> {
    if lag < 0 {
        return Err(invalid(format!("block lag must be nonnegative, got {lag}")));
    }
    geom.validate()?;
    profile.validate()?;
    Ok(temporal_correlation_signed(geom, profile, lag))
}

/// Signed-lag variant; `J0` is even so negative lags stay real.
pub(crate) fn temporal_correlation_signed(geom: &PrbGeometry, profile: &ChannelProfile, lag: i64) -> ComplexMatrix {
    let ns = geom.n_symbols;
    let w = 2.0 * PI * profile.doppler() / geom.symbol_rate;
    let base = lag * ns as i64;
    ComplexMatrix::from_fn(ns, ns, |i, j| {
        let d = (base + j as i64 - i as i64) as f64;
        Complex64::new(j0_unchecked(w * d), 0.0)
    })
}

/// `Pi_F`, symmetric Toeplitz with lag-`d` entry `si(2 pi tau_max dF d)`.
pub fn spectral_correlation(geom: &PrbGeometry, profile: &ChannelProfile) -> ComplexMatrix {
    let nc = geom.n_subcarriers;
    let w = 2.0 * PI * profile.tau_max * geom.subcarrier_spacing;
    ComplexMatrix::from_fn(nc, nc, |i, j| {
        let d = j as f64 - i as f64;
        Complex64::new(si(w * d), 0.0)
    })
}

/// `Phi_hh(lag) = E{h[t] h[t+lag]^H} = E|h|^2 (Pi_T(lag) kron Pi_F)`.
pub fn prb_covariance(geom: &PrbGeometry, profile: &ChannelProfile, lag: i64) -> Result<ComplexMatrix> {
    if lag < 0 {
        return Err(invalid(format!("block lag must be nonnegative, got {lag}")));
    }
    geom.validate()?;
    profile.validate()?;
    Ok(prb_covariance_signed(geom, profile, lag))
}

pub(crate) fn prb_covariance_signed(geom: &PrbGeometry, profile: &ChannelProfile, lag: i64) -> ComplexMatrix {
    let pt = temporal_correlation_signed(geom, profile, lag);
    let pf = spectral_correlation(geom, profile);
    pt.kronecker(&pf).scale(profile.coeff_variance)
}

/// Frequency-flat realisations with i.i.d. CN(0, variance) entries; UL and DL
/// matrices are drawn independently. Realisation `i` depends only on
/// `(seed, i)`.
pub fn sample_flat_channels(n_bs: usize, k: usize, count: usize, seed: u64, variance: f64) -> Result<Vec<ChannelRealization>> {
    if n_bs == 0 || k == 0 {
        return Err(invalid("antenna and terminal counts must be positive"));
    }
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(invalid("channel variance must be finite and nonnegative"));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = stream_rng(seed, idx as u64);
            let h_ul = ComplexMatrix::from_fn(n_bs, k, |_, _| complex_gaussian(&mut rng, variance));
            let h_dl = ComplexMatrix::from_fn(n_bs, k, |_, _| complex_gaussian(&mut rng, variance));
            ChannelRealization { h_ul, h_dl }
        })
        .collect())
}

/// Pairs `(h[t], h[t+lag])` drawn from the joint Gaussian with diagonal blocks
/// `Phi_hh(0)` and upper cross block `Phi_hh(lag)`.
pub fn sample_prb_pair(
    geom: &PrbGeometry,
    profile: &ChannelProfile,
    lag: i64,
    count: usize,
    seed: u64,
) -> Result<Vec<(ComplexVector, ComplexVector)>> {
    let phi0 = prb_covariance(geom, profile, 0)?;
    if lag == 0 {
        let s = sample_correlated(&phi0, count, seed)?;
        return Ok(s.into_iter().map(|v| (v.clone(), v)).collect());
    }
    let cross = prb_covariance(geom, profile, lag)?;
    let l = geom.block_len();
    let mut joint = ComplexMatrix::zeros(2 * l, 2 * l);
    joint.view_mut((0, 0), (l, l)).copy_from(&phi0);
    joint.view_mut((l, l), (l, l)).copy_from(&phi0);
    joint.view_mut((0, l), (l, l)).copy_from(&cross);
    joint.view_mut((l, 0), (l, l)).copy_from(&cross.adjoint());
    let s = sample_correlated(&joint, count, seed)?;
    Ok(s.into_iter()
        .map(|v| (v.rows(0, l).into_owned(), v.rows(l, l).into_owned()))
        .collect())
}
