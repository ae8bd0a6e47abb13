//! Scenario and run configuration. The TOML boundary uses km/h, µs and GHz;
//! everything handed to the numerical modules is in SI units.

use crate::capacity::LinkBudget;
use crate::channel::{ChannelProfile, PrbGeometry};
use crate::error::{Error, Result};
use crate::estimation::{Reduction, UplinkNoiseModel};
use crate::feedback::FeedbackMode;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Downlink transmission strategy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DlMode {
    /// Per point, whichever of spatial multiplexing and TDM gives the larger
    /// net downlink rate.
    #[default]
    Auto,
    Spatial,
    Tdm,
}

impl fmt::Display for DlMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DlMode::Auto => "auto",
            DlMode::Spatial => "spatial",
            DlMode::Tdm => "tdm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub k: usize,
    pub carrier_freq_ghz: f64,
    pub velocity_kmh: f64,
    pub tau_max_us: f64,
    /// `E{|h|^2}`.
    pub coeff_variance: f64,
    pub sigma_ul2: f64,
    pub sigma_dl2: f64,
    pub sigma_p2: f64,
    pub p_max_ul: f64,
    pub p_tot_dl: f64,
    pub n_rank: usize,
    pub n_d: usize,
    pub feedback_mode: FeedbackMode,
    pub dl_mode: DlMode,
    pub ul_noise: UplinkNoiseModel,
    pub reduction: Reduction,
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub symbol_rate_hz: f64,
    pub subcarrier_spacing_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let g = PrbGeometry::default();
        let b = LinkBudget::default();
        Self {
            n_bs: 4,
            k: 4,
            carrier_freq_ghz: 2.6,
            velocity_kmh: 10.0,
            tau_max_us: 1.0,
            coeff_variance: 1.0,
            sigma_ul2: b.sigma_ul2,
            sigma_dl2: b.sigma_dl2,
            sigma_p2: b.sigma_p2,
            p_max_ul: b.p_max_ul,
            p_tot_dl: b.p_tot_dl,
            n_rank: 2,
            n_d: 5,
            feedback_mode: FeedbackMode::Redundant,
            dl_mode: DlMode::Auto,
            ul_noise: UplinkNoiseModel::Mmse,
            reduction: Reduction::Max,
            n_symbols: g.n_symbols,
            n_subcarriers: g.n_subcarriers,
            symbol_rate_hz: g.symbol_rate,
            subcarrier_spacing_hz: g.subcarrier_spacing,
        }
    }
}

impl SystemConfig {
    pub fn geometry(&self) -> PrbGeometry {
        PrbGeometry {
            n_symbols: self.n_symbols,
            n_subcarriers: self.n_subcarriers,
            symbol_rate: self.symbol_rate_hz,
            subcarrier_spacing: self.subcarrier_spacing_hz,
        }
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            sigma_ul2: self.sigma_ul2,
            sigma_dl2: self.sigma_dl2,
            sigma_p2: self.sigma_p2,
            p_max_ul: self.p_max_ul,
            p_tot_dl: self.p_tot_dl,
        }
    }

    /// Channel profile at the given speed and delay spread.
    pub fn profile_at(&self, velocity_kmh: f64, tau_max_us: f64) -> ChannelProfile {
        ChannelProfile {
            coeff_variance: self.coeff_variance,
            ..ChannelProfile::from_kmh(self.carrier_freq_ghz * 1e9, velocity_kmh, tau_max_us)
        }
    }

    pub fn profile(&self) -> ChannelProfile {
        self.profile_at(self.velocity_kmh, self.tau_max_us)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_bs == 0 || self.k == 0 {
            return fail("n_bs and k must be at least 1".into());
        }
        if self.n_rank == 0 {
            return fail("n_rank must be at least 1".into());
        }
        self.geometry().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.n_rank > self.geometry().block_len() {
            return fail(format!("n_rank {} exceeds the PRB size", self.n_rank));
        }
        self.profile().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.budget().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Sweep grids. Pattern axes come from the built-in lattice catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_b: Vec<f64>,
    /// Extra lookup-table axes; the scenario's own speed and delay spread
    /// are always included.
    pub velocities_kmh: Vec<f64>,
    pub tau_max_us: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_b: (0..=12).map(|i| 2.0 * i as f64).collect(),
            velocities_kmh: Vec::new(),
            tau_max_us: Vec::new(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_b.is_empty() {
            return Err(Error::Config("n_b grid must not be empty".into()));
        }
        if self.n_b.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(Error::Config("n_b grid entries must be finite and nonnegative".into()));
        }
        if self.velocities_kmh.iter().chain(&self.tau_max_us).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Config("lookup axes must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Contents of a configuration file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub grids: GridConfig,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.grids.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_scenario() {
        let c = SystemConfig::default();
        c.validate().unwrap();
        assert_eq!((c.n_bs, c.k, c.n_rank, c.n_d), (4, 4, 2, 5));
        let p = c.profile();
        assert_eq!(p.carrier_freq, 2.6e9);
        assert!((p.tau_max - 1e-6).abs() < 1e-18);
        assert_eq!(GridConfig::default().n_b.len(), 13);
    }

    #[test]
    fn parses_partial_toml() {
        let cfg = RunConfig::from_toml(
            "seed = 3\n[system]\nvelocity_kmh = 100.0\nfeedback_mode = \"successive\"\n[grids]\nn_b = [0.0, 6.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.system.velocity_kmh, 100.0);
        assert_eq!(cfg.system.feedback_mode, FeedbackMode::Successive);
        assert_eq!(cfg.grids.n_b, vec![0.0, 6.0]);
        assert_eq!(cfg.system.k, 4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::from_toml("[system]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[system]\nk = 0\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[grids]\nn_b = []\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[system]\nsigma_dl2 = -1.0\n"), Err(Error::Config(_))));
    }
}
