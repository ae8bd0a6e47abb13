//! CSI-quality lookup table over pilot densities, feedback budget, speed and
//! delay spread.

use crate::config::SystemConfig;
use crate::error::{invalid, Error, Result};
use crate::estimation::{cramer_rao_noise, estimation_mse, ratio_of, UplinkNoiseModel};
use crate::feedback::{csit_ratio_of, FeedbackConfig, FeedbackMode, FeedbackModel};
use crate::pilots::PilotPattern;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Stored in place of a noise ratio when the link carries no usable channel
/// knowledge; any rate computed from it is 0.
pub const UNUSABLE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupAxes {
    pub rho_ul: Vec<f64>,
    pub rho_dl: Vec<f64>,
    pub n_b: Vec<f64>,
    pub v_kmh: Vec<f64>,
    pub tau_max_us: Vec<f64>,
}

impl LookupAxes {
    fn dims(&self) -> [usize; 5] {
        [self.rho_ul.len(), self.rho_dl.len(), self.n_b.len(), self.v_kmh.len(), self.tau_max_us.len()]
    }

    fn flat(&self, idx: [usize; 5]) -> usize {
        let d = self.dims();
        (0..5).fold(0, |acc, a| acc * d[a] + idx[a])
    }

    fn axis(&self, a: usize) -> &[f64] {
        match a {
            0 => &self.rho_ul,
            1 => &self.rho_dl,
            2 => &self.n_b,
            3 => &self.v_kmh,
            _ => &self.tau_max_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupEntry {
    pub idx: [usize; 5],
    pub sigma_ul_bs: f64,
    pub sigma_dl_ut: f64,
    pub sigma_dl_ut_tdm: f64,
    pub sigma_dl_bs: f64,
}

/// Settings the table was built with, checked when a table is reused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupMeta {
    pub feedback_mode: FeedbackMode,
    pub n_d: usize,
    pub n_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub axes: LookupAxes,
    /// Row-major over the axes in declaration order.
    pub values: Vec<LookupEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<LookupMeta>,
}

/// Index of the grid value closest to `x` (first one on ties).
fn nearest(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, &a) in axis.iter().enumerate() {
        if (a - x).abs() < (axis[best] - x).abs() {
            best = i;
        }
    }
    best
}

impl LookupTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn entry(&self, idx: [usize; 5]) -> Option<&LookupEntry> {
        let d = self.axes.dims();
        if (0..5).any(|a| idx[a] >= d[a]) {
            return None;
        }
        self.values.get(self.axes.flat(idx))
    }

    /// Nearest-node query; no interpolation.
    pub fn query(&self, rho_ul: f64, rho_dl: f64, n_b: f64, v_kmh: f64, tau_max_us: f64) -> &LookupEntry {
        let idx = [rho_ul, rho_dl, n_b, v_kmh, tau_max_us]
            .iter()
            .enumerate()
            .map(|(a, &x)| nearest(self.axes.axis(a), x))
            .collect::<Vec<_>>();
        &self.values[self.axes.flat([idx[0], idx[1], idx[2], idx[3], idx[4]])]
    }

    /// Complete grid, sorted axes, consistent indices and finite values.
    pub fn validate(&self) -> Result<()> {
        let d = self.axes.dims();
        if d.contains(&0) {
            return Err(invalid("lookup table has an empty axis"));
        }
        for a in 0..5 {
            let axis = self.axes.axis(a);
            if axis.windows(2).any(|w| !(w[0] < w[1])) || axis.iter().any(|x| !x.is_finite()) {
                return Err(invalid("lookup axes must be finite and strictly increasing"));
            }
        }
        if self.values.len() != d.iter().product::<usize>() {
            return Err(invalid(format!(
                "lookup table has {} entries, grid needs {}",
                self.values.len(),
                d.iter().product::<usize>()
            )));
        }
        for (i, e) in self.values.iter().enumerate() {
            if self.axes.flat(e.idx) != i || (0..5).any(|a| e.idx[a] >= d[a]) {
                return Err(invalid(format!("lookup entry {i} has index {:?} out of order", e.idx)));
            }
            let vals = [e.sigma_ul_bs, e.sigma_dl_ut, e.sigma_dl_ut_tdm, e.sigma_dl_bs];
            if vals.iter().any(|v| !v.is_finite() || (*v < 0.0 && *v != UNUSABLE)) {
                return Err(invalid(format!("lookup entry {i} holds an invalid value")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: LookupTable = serde_json::from_str(text).map_err(|e| Error::Config(format!("lookup table: {e}")))?;
        t.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(t)
    }
}

/// Grid over which a table is built.
#[derive(Debug, Clone, Copy)]
pub struct LookupGrids<'a> {
    pub ul_patterns: &'a [PilotPattern],
    pub dl_patterns: &'a [PilotPattern],
    pub n_b: &'a [f64],
    pub v_kmh: &'a [f64],
    pub tau_max_us: &'a [f64],
}

fn sorted_unique(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn by_density(ps: &[PilotPattern]) -> Vec<&PilotPattern> {
    let mut v: Vec<&PilotPattern> = ps.iter().collect();
    v.sort_by_key(|p| p.n_pilots());
    v
}

fn usable(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::UnusableLink { .. }) => Ok(UNUSABLE),
        other => other,
    }
}

fn ul_noise(cfg: &SystemConfig, pattern: &PilotPattern, v: f64, tau: f64) -> Result<f64> {
    match cfg.ul_noise {
        UplinkNoiseModel::CramerRao => Ok(cramer_rao_noise(cfg.sigma_ul2, pattern.n_pilots(), cfg.p_max_ul)?.0),
        UplinkNoiseModel::Mmse => {
            let profile = cfg.profile_at(v, tau);
            let mse = estimation_mse(&profile, &cfg.geometry(), pattern, cfg.sigma_p2, 0)?;
            usable(ratio_of(mse.reduce(cfg.reduction), profile.coeff_variance).map(|n| n.0))
        }
    }
}

/// `(sigma_DL,UT, sigma_DL,BS per N_b)` for one downlink pattern.
fn dl_noise(cfg: &SystemConfig, pattern: &PilotPattern, n_b: &[f64], v: f64, tau: f64) -> Result<(f64, Vec<f64>)> {
    let profile = cfg.profile_at(v, tau);
    let geom = cfg.geometry();
    let variance = profile.coeff_variance;
    let csir = estimation_mse(&profile, &geom, pattern, cfg.sigma_p2, 0)?.reduce(cfg.reduction);
    let sigma_ut = usable(ratio_of(csir, variance).map(|n| n.0))?;
    if sigma_ut == UNUSABLE {
        return Ok((UNUSABLE, vec![UNUSABLE; n_b.len()]));
    }
    let model = FeedbackModel::new(&profile, &geom, pattern, cfg.sigma_p2, cfg.n_d, cfg.n_rank)?;
    let mut bs = Vec::with_capacity(n_b.len());
    for &bits in n_b {
        let fb = FeedbackConfig { n_b: bits, n_rank: cfg.n_rank, n_d: cfg.n_d, mode: cfg.feedback_mode };
        let csit = model.operating_mse(&fb)?;
        let rep = crate::estimation::MsePerSymbol { values: csit, lag: cfg.n_d }.reduce(cfg.reduction);
        bs.push(usable(csit_ratio_of(rep, csir, variance))?);
    }
    Ok((sigma_ut, bs))
}

/// Evaluates every grid node. Deterministic: no randomness is involved.
pub fn build_lookup(config: &SystemConfig, grids: &LookupGrids) -> Result<LookupTable> {
    config.validate()?;
    let ul = by_density(grids.ul_patterns);
    let dl = by_density(grids.dl_patterns);
    let n_b = sorted_unique(grids.n_b);
    let v = sorted_unique(grids.v_kmh);
    let tau = sorted_unique(grids.tau_max_us);
    if ul.is_empty() || dl.is_empty() || n_b.is_empty() || v.is_empty() || tau.is_empty() {
        return Err(invalid("lookup grids must be non-empty"));
    }
    let geom = config.geometry();
    if ul.iter().chain(&dl).any(|p| p.geometry != geom) {
        return Err(invalid("pattern geometry differs from the configured PRB"));
    }
    let rho = |ps: &[&PilotPattern]| -> Result<Vec<f64>> {
        let r: Vec<f64> = ps.iter().map(|p| p.density()).collect();
        if r.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("pattern densities along a lookup axis must be distinct"));
        }
        Ok(r)
    };
    let axes = LookupAxes { rho_ul: rho(&ul)?, rho_dl: rho(&dl)?, n_b: n_b.clone(), v_kmh: v.clone(), tau_max_us: tau.clone() };

    let env: Vec<(usize, usize)> = (0..v.len()).flat_map(|i| (0..tau.len()).map(move |j| (i, j))).collect();
    let ul_tasks: Vec<(usize, usize, usize)> = (0..ul.len()).flat_map(|p| env.iter().map(move |&(i, j)| (p, i, j))).collect();
    let dl_tasks: Vec<(usize, usize, usize)> = (0..dl.len()).flat_map(|p| env.iter().map(move |&(i, j)| (p, i, j))).collect();

    let ul_vals: Vec<f64> = ul_tasks
        .par_iter()
        .map(|&(p, i, j)| ul_noise(config, ul[p], v[i], tau[j]))
        .collect::<Result<_>>()?;
    let dl_vals: Vec<(f64, Vec<f64>)> = dl_tasks
        .par_iter()
        .map(|&(p, i, j)| dl_noise(config, dl[p], &n_b, v[i], tau[j]))
        .collect::<Result<_>>()?;

    let n_env = env.len();
    let mut values = Vec::with_capacity(ul.len() * dl.len() * n_b.len() * n_env);
    for iu in 0..ul.len() {
        for id in 0..dl.len() {
            for ib in 0..n_b.len() {
                for iv in 0..v.len() {
                    for it in 0..tau.len() {
                        let e = iv * tau.len() + it;
                        let sigma_ul_bs = ul_vals[iu * n_env + e];
                        let (sigma_dl_ut, ref bs) = dl_vals[id * n_env + e];
                        values.push(LookupEntry {
                            idx: [iu, id, ib, iv, it],
                            sigma_ul_bs,
                            sigma_dl_ut,
                            // the single TDM coefficient sees the same
                            // pattern and channel statistics
                            sigma_dl_ut_tdm: sigma_dl_ut,
                            sigma_dl_bs: bs[ib],
                        });
                    }
                }
            }
        }
    }
    let meta = LookupMeta { feedback_mode: config.feedback_mode, n_d: config.n_d, n_rank: config.n_rank };
    let table = LookupTable { axes, values, meta: Some(meta) };
    table.validate()?;
    Ok(table)
}
