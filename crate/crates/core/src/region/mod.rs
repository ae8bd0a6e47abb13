//! Net-rate accounting and the operating-parameter sweep.
//!
//! All points of a sweep share one set of channel realizations, so rate
//! differences between points reflect the parameters rather than sampling
//! noise. Gross rates depend on the parameters only through the CSI-quality
//! figures, which are cached per distinct value.

mod frontier;
mod lookup;
mod output;

pub use frontier::{below_hull, compare_objective, convex_region, pareto_frontier, weighted_optimum};
pub use lookup::{build_lookup, LookupAxes, LookupEntry, LookupGrids, LookupMeta, LookupTable, UNUSABLE};
pub use output::{write_csv, write_json};

use crate::capacity::{dl_effective_params, dl_sum_rate, tdm_sum_rate, ul_effective_params, ul_sum_rate};
use crate::channel::{sample_flat_channels, ChannelRealization, PrbGeometry};
use crate::config::{DlMode, SystemConfig};
use crate::error::{invalid, Result};
use crate::feedback::FeedbackMode;
use crate::pilots::PilotPattern;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingParams {
    pub ul_pattern: String,
    pub dl_pattern: String,
    pub rho_ul: f64,
    pub rho_dl: f64,
    pub n_b: f64,
    pub dl_mode: DlMode,
    pub feedback_mode: FeedbackMode,
}

impl OperatingParams {
    /// Stable textual key, also the last tie-breaker between points.
    pub fn id(&self) -> String {
        format!(
            "{}/{}/nb{:07.3}/{}/{}",
            self.ul_pattern, self.dl_pattern, self.n_b, self.dl_mode, self.feedback_mode
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub params: OperatingParams,
    /// Bits per channel access, averaged over the realizations.
    pub gross_ul: f64,
    pub gross_dl: f64,
    pub net_ul: f64,
    pub net_dl: f64,
    pub realization_count: usize,
    /// False when overhead exceeded the gross rate or a link was unusable.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetRates {
    pub ul: f64,
    pub dl: f64,
    /// Neither net rate had to be clamped.
    pub feasible: bool,
}

/// Uplink rate left after pilots and feedback, before clamping at 0.
pub fn net_ul_unclamped(gross_ul: f64, params: &OperatingParams, geom: &PrbGeometry, n_bs: usize, k: usize) -> f64 {
    let l = geom.block_len() as f64;
    (gross_ul * l * (1.0 - k as f64 * params.rho_ul) - params.n_b * (n_bs * k) as f64) / l
}

/// Net rates after pilot and feedback overhead, clamped at 0.
pub fn net_rates(gross_ul: f64, gross_dl: f64, params: &OperatingParams, geom: &PrbGeometry, n_bs: usize, k: usize) -> Result<NetRates> {
    if !(gross_ul >= 0.0 && gross_dl >= 0.0) {
        return Err(invalid(format!("gross rates must be nonnegative, got ({gross_ul}, {gross_dl})")));
    }
    let ul = net_ul_unclamped(gross_ul, params, geom, n_bs, k);
    let dl = match params.dl_mode {
        DlMode::Tdm => gross_dl * (1.0 - params.rho_dl),
        // one dedicated pilot per antenna and one per terminal stream
        DlMode::Spatial | DlMode::Auto => gross_dl * (1.0 - (n_bs + k) as f64 * params.rho_dl),
    };
    Ok(NetRates { ul: ul.max(0.0), dl: dl.max(0.0), feasible: ul >= 0.0 && dl >= 0.0 })
}

/// The common realization set drawn from `seed`.
pub fn shared_realizations(config: &SystemConfig, samples: usize, seed: u64) -> Result<Vec<ChannelRealization>> {
    if samples == 0 {
        return Err(invalid("at least one channel realization is required"));
    }
    sample_flat_channels(config.n_bs, config.k, samples, seed, config.coeff_variance)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Average gross uplink rate; 0 when the link is unusable.
pub fn gross_ul(config: &SystemConfig, sigma_ul_bs: f64, realizations: &[ChannelRealization]) -> Result<f64> {
    if sigma_ul_bs == UNUSABLE {
        return Ok(0.0);
    }
    let rates: Vec<f64> = realizations
        .par_iter()
        .map(|r| {
            let eff = ul_effective_params(&r.h_ul, config.coeff_variance, sigma_ul_bs)?;
            Ok(ul_sum_rate(&eff, config.sigma_ul2, config.p_max_ul)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(mean(&rates))
}

/// Average gross downlink rate with spatial multiplexing.
pub fn gross_dl_spatial(config: &SystemConfig, sigma_ut: f64, sigma_bs: f64, realizations: &[ChannelRealization]) -> Result<f64> {
    if sigma_ut == UNUSABLE || sigma_bs == UNUSABLE {
        return Ok(0.0);
    }
    let rates: Vec<f64> = realizations
        .par_iter()
        .map(|r| {
            let eff = dl_effective_params(&r.h_dl, config.coeff_variance, sigma_ut, sigma_bs)?;
            Ok(dl_sum_rate(&eff, config.sigma_dl2, config.p_tot_dl)?.0)
        })
        .collect::<Result<_>>()?;
    Ok(mean(&rates))
}

/// Average gross downlink rate with TDM.
pub fn gross_dl_tdm(config: &SystemConfig, sigma_ut: f64, realizations: &[ChannelRealization]) -> Result<f64> {
    if sigma_ut == UNUSABLE {
        return Ok(0.0);
    }
    let rates: Vec<f64> = realizations
        .par_iter()
        .map(|r| tdm_sum_rate(&r.h_dl, config.coeff_variance, sigma_ut, config.sigma_dl2, config.p_tot_dl))
        .collect::<Result<_>>()?;
    Ok(mean(&rates))
}

/// Lookup node for `params` at the configured speed and delay spread; the
/// table must hold these exact coordinates.
fn node<'a>(config: &SystemConfig, params: &OperatingParams, lookup: &'a LookupTable) -> Result<&'a LookupEntry> {
    let want = [params.rho_ul, params.rho_dl, params.n_b, config.velocity_kmh, config.tau_max_us];
    let e = lookup.query(want[0], want[1], want[2], want[3], want[4]);
    let axes = [&lookup.axes.rho_ul, &lookup.axes.rho_dl, &lookup.axes.n_b, &lookup.axes.v_kmh, &lookup.axes.tau_max_us];
    for a in 0..5 {
        let got = axes[a][e.idx[a]];
        if (got - want[a]).abs() > 1e-9 * want[a].abs().max(1.0) {
            return Err(invalid(format!("lookup table has no node at {want:?}")));
        }
    }
    Ok(e)
}

fn is_unusable(e: &LookupEntry, mode: DlMode) -> bool {
    e.sigma_ul_bs == UNUSABLE
        || e.sigma_dl_ut == UNUSABLE
        || (mode == DlMode::Spatial && e.sigma_dl_bs == UNUSABLE)
        || (mode == DlMode::Tdm && e.sigma_dl_ut_tdm == UNUSABLE)
}

fn finish(
    config: &SystemConfig,
    params: OperatingParams,
    entry: &LookupEntry,
    gross_ul: f64,
    gross_dl: f64,
    count: usize,
) -> Result<RatePoint> {
    let net = net_rates(gross_ul, gross_dl, &params, &config.geometry(), config.n_bs, config.k)?;
    let feasible = net.feasible && !is_unusable(entry, params.dl_mode);
    Ok(RatePoint { params, gross_ul, gross_dl, net_ul: net.ul, net_dl: net.dl, realization_count: count, feasible })
}

/// Rates of one operating point over the given realizations. With
/// `DlMode::Auto` the mode with the larger net downlink rate is reported,
/// spatial on ties.
pub fn evaluate_operating_point(
    config: &SystemConfig,
    params: &OperatingParams,
    lookup: &LookupTable,
    realizations: &[ChannelRealization],
) -> Result<RatePoint> {
    if realizations.is_empty() {
        return Err(invalid("at least one channel realization is required"));
    }
    if params.n_b < 0.0 {
        return Err(invalid("n_b must be nonnegative"));
    }
    let e = node(config, params, lookup)?;
    let ul = gross_ul(config, e.sigma_ul_bs, realizations)?;
    let n = realizations.len();
    let spatial = || -> Result<RatePoint> {
        let dl = gross_dl_spatial(config, e.sigma_dl_ut, e.sigma_dl_bs, realizations)?;
        finish(config, OperatingParams { dl_mode: DlMode::Spatial, ..params.clone() }, e, ul, dl, n)
    };
    let tdm = || -> Result<RatePoint> {
        let dl = gross_dl_tdm(config, e.sigma_dl_ut_tdm, realizations)?;
        finish(config, OperatingParams { dl_mode: DlMode::Tdm, ..params.clone() }, e, ul, dl, n)
    };
    match params.dl_mode {
        DlMode::Spatial => spatial(),
        DlMode::Tdm => tdm(),
        DlMode::Auto => {
            let (s, t) = (spatial()?, tdm()?);
            Ok(if t.net_dl > s.net_dl { t } else { s })
        }
    }
}

/// Modes a sweep emits for the configured DL mode.
pub fn sweep_modes(mode: DlMode) -> Vec<DlMode> {
    match mode {
        DlMode::Auto => vec![DlMode::Spatial, DlMode::Tdm],
        m => vec![m],
    }
}

/// One point per (UL pattern, DL pattern, `N_b`, DL mode), in that nesting
/// order. `DlMode::Auto` emits both modes so the frontier can choose.
pub fn sweep(
    config: &SystemConfig,
    lookup: &LookupTable,
    ul_patterns: &[PilotPattern],
    dl_patterns: &[PilotPattern],
    n_b: &[f64],
    realizations: &[ChannelRealization],
) -> Result<Vec<RatePoint>> {
    if ul_patterns.is_empty() || dl_patterns.is_empty() || n_b.is_empty() {
        return Err(invalid("sweep grids must be non-empty"));
    }
    if realizations.is_empty() {
        return Err(invalid("at least one channel realization is required"));
    }
    let modes = sweep_modes(config.dl_mode);
    let mut params = Vec::new();
    for u in ul_patterns {
        for d in dl_patterns {
            for &b in n_b {
                for &m in &modes {
                    params.push(OperatingParams {
                        ul_pattern: u.id.clone(),
                        dl_pattern: d.id.clone(),
                        rho_ul: u.density(),
                        rho_dl: d.density(),
                        n_b: b,
                        dl_mode: m,
                        feedback_mode: config.feedback_mode,
                    });
                }
            }
        }
    }
    let entries: Vec<&LookupEntry> = params.iter().map(|p| node(config, p, lookup)).collect::<Result<_>>()?;

    // distinct CSI figures, keyed by bit pattern so the cache is exact
    let mut ul_keys = BTreeMap::new();
    let mut spatial_keys = BTreeMap::new();
    let mut tdm_keys = BTreeMap::new();
    for (p, e) in params.iter().zip(&entries) {
        ul_keys.insert(e.sigma_ul_bs.to_bits(), 0.0);
        match p.dl_mode {
            DlMode::Tdm => tdm_keys.insert(e.sigma_dl_ut_tdm.to_bits(), 0.0),
            _ => spatial_keys.insert((e.sigma_dl_ut.to_bits(), e.sigma_dl_bs.to_bits()), 0.0),
        };
    }
    log::info!(
        "sweep: {} points, {} UL / {} spatial / {} TDM rate evaluations over {} realizations",
        params.len(),
        ul_keys.len(),
        spatial_keys.len(),
        tdm_keys.len(),
        realizations.len()
    );
    for (k, v) in ul_keys.iter_mut() {
        *v = gross_ul(config, f64::from_bits(*k), realizations)?;
    }
    for ((ut, bs), v) in spatial_keys.iter_mut() {
        *v = gross_dl_spatial(config, f64::from_bits(*ut), f64::from_bits(*bs), realizations)?;
    }
    for (k, v) in tdm_keys.iter_mut() {
        *v = gross_dl_tdm(config, f64::from_bits(*k), realizations)?;
    }

    let n = realizations.len();
    params
        .into_iter()
        .zip(entries)
        .map(|(p, e)| {
            let ul = ul_keys[&e.sigma_ul_bs.to_bits()];
            let dl = match p.dl_mode {
                DlMode::Tdm => tdm_keys[&e.sigma_dl_ut_tdm.to_bits()],
                _ => spatial_keys[&(e.sigma_dl_ut.to_bits(), e.sigma_dl_bs.to_bits())],
            };
            finish(config, p, e, ul, dl, n)
        })
        .collect()
}

/// Swept points with their frontier and time-sharing hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub points: Vec<RatePoint>,
    /// Indices into `points`, by decreasing net UL rate.
    pub frontier: Vec<usize>,
    /// Hull vertices `(net UL, net DL)` from the DL axis to the UL axis.
    pub hull: Vec<(f64, f64)>,
}

impl RateRegion {
    pub fn new(points: Vec<RatePoint>) -> Self {
        let frontier = pareto_frontier(&points);
        let xy: Vec<(f64, f64)> = frontier.iter().map(|&i| (points[i].net_ul, points[i].net_dl)).collect();
        let hull = convex_region(&xy);
        Self { points, frontier, hull }
    }

    pub fn on_frontier(&self, i: usize) -> bool {
        self.frontier.contains(&i)
    }

    /// The point is a hull vertex (axis anchors are not points).
    pub fn on_hull(&self, i: usize) -> bool {
        let p = &self.points[i];
        self.on_frontier(i) && self.hull.contains(&(p.net_ul, p.net_dl))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilots::{default_catalog, lattice_pattern};

    fn params(rho_ul: f64, rho_dl: f64, n_b: f64, mode: DlMode) -> OperatingParams {
        OperatingParams {
            ul_pattern: "u".into(),
            dl_pattern: "d".into(),
            rho_ul,
            rho_dl,
            n_b,
            dl_mode: mode,
            feedback_mode: FeedbackMode::Redundant,
        }
    }

    #[test]
    fn net_rate_examples() {
        let g = PrbGeometry::default();
        let n = net_rates(3.0, 2.0, &params(0.0, 0.0, 0.0, DlMode::Spatial), &g, 4, 4).unwrap();
        assert_eq!((n.ul, n.dl, n.feasible), (3.0, 2.0, true));
        let n = net_rates(4.0, 1.0, &params(3.0 / 168.0, 0.0, 12.0, DlMode::Spatial), &g, 4, 4).unwrap();
        let oracle = (4.0 * 168.0 * (1.0 - 12.0 / 168.0) - 192.0) / 168.0;
        assert!((n.ul - oracle).abs() < 1e-12 && (oracle - 2.571428571428571).abs() < 1e-12);
        let n = net_rates(1.0, 5.0, &params(0.0, 0.1, 0.0, DlMode::Tdm), &g, 4, 4).unwrap();
        assert!((n.dl - 4.5).abs() < 1e-12);
        let n = net_rates(0.1, 1.0, &params(0.0, 0.0, 20.0, DlMode::Spatial), &g, 4, 4).unwrap();
        assert_eq!(n.ul, 0.0);
        assert!(!n.feasible);
        assert!(net_rates(-1.0, 0.0, &params(0.0, 0.0, 0.0, DlMode::Tdm), &g, 4, 4).is_err());
    }

    #[test]
    fn net_ul_slope_per_feedback_bit() {
        let g = PrbGeometry::default();
        for b in 0..24 {
            let lo = net_ul_unclamped(2.0, &params(0.01, 0.0, b as f64, DlMode::Tdm), &g, 4, 4);
            let hi = net_ul_unclamped(2.0, &params(0.01, 0.0, (b + 1) as f64, DlMode::Tdm), &g, 4, 4);
            assert!((lo - hi - 16.0 / 168.0).abs() < 1e-12);
        }
    }

    fn small_setup() -> (SystemConfig, Vec<PilotPattern>, LookupTable) {
        let cfg = SystemConfig { n_bs: 2, k: 2, ..SystemConfig::default() };
        let g = cfg.geometry();
        let pats = vec![lattice_pattern(&g, 7, 6, (0, 0)).unwrap(), lattice_pattern(&g, 7, 3, (0, 0)).unwrap()];
        let t = build_lookup(
            &cfg,
            &LookupGrids { ul_patterns: &pats, dl_patterns: &pats, n_b: &[0.0, 8.0], v_kmh: &[10.0], tau_max_us: &[1.0] },
        )
        .unwrap();
        (cfg, pats, t)
    }

    #[test]
    fn single_realization_and_averaging() {
        let (cfg, pats, t) = small_setup();
        let real = shared_realizations(&cfg, 3, 7).unwrap();
        let p = OperatingParams {
            ul_pattern: pats[0].id.clone(),
            dl_pattern: pats[1].id.clone(),
            rho_ul: pats[0].density(),
            rho_dl: pats[1].density(),
            n_b: 8.0,
            dl_mode: DlMode::Spatial,
            feedback_mode: FeedbackMode::Redundant,
        };
        let all = evaluate_operating_point(&cfg, &p, &t, &real).unwrap();
        let singles: Vec<RatePoint> =
            real.iter().map(|r| evaluate_operating_point(&cfg, &p, &t, std::slice::from_ref(r)).unwrap()).collect();
        let e = t.query(p.rho_ul, p.rho_dl, 8.0, 10.0, 1.0);
        let eff = dl_effective_params(&real[0].h_dl, 1.0, e.sigma_dl_ut, e.sigma_dl_bs).unwrap();
        assert_eq!(singles[0].gross_dl, dl_sum_rate(&eff, cfg.sigma_dl2, cfg.p_tot_dl).unwrap().0);
        let avg = singles.iter().map(|s| s.gross_dl).sum::<f64>() / 3.0;
        assert!((avg - all.gross_dl).abs() < 1e-12);
        assert_eq!(all.realization_count, 3);

        let auto = evaluate_operating_point(&cfg, &OperatingParams { dl_mode: DlMode::Auto, ..p.clone() }, &t, &real).unwrap();
        let tdm = evaluate_operating_point(&cfg, &OperatingParams { dl_mode: DlMode::Tdm, ..p.clone() }, &t, &real).unwrap();
        assert_eq!(auto.net_dl, all.net_dl.max(tdm.net_dl));

        let off = OperatingParams { n_b: 4.0, ..p };
        assert!(evaluate_operating_point(&cfg, &off, &t, &real).is_err());
    }

    #[test]
    fn sweep_matches_pointwise_evaluation() {
        let (cfg, pats, t) = small_setup();
        let real = shared_realizations(&cfg, 2, 1).unwrap();
        let pts = sweep(&cfg, &t, &pats, &pats, &[0.0, 8.0], &real).unwrap();
        assert_eq!(pts.len(), 2 * 2 * 2 * 2);
        for p in &pts {
            assert_eq!(&evaluate_operating_point(&cfg, &p.params, &t, &real).unwrap(), p);
            assert!(p.net_ul <= p.gross_ul && p.net_dl <= p.gross_dl);
            assert!(pats.iter().any(|q| q.id == p.params.ul_pattern));
            assert!([0.0, 8.0].contains(&p.params.n_b));
        }
        let one = sweep(&cfg, &t, &pats[..1], &pats[..1], &[0.0], &real).unwrap();
        assert_eq!(one.len(), 2);
        let region = RateRegion::new(pts);
        for &i in &region.frontier {
            for &j in &region.frontier {
                let (a, b) = (&region.points[i], &region.points[j]);
                assert!(i == j || !(a.net_ul >= b.net_ul && a.net_dl >= b.net_dl));
            }
        }
    }

    #[test]
    fn sweep_is_independent_of_thread_count() {
        let cfg = SystemConfig { n_bs: 2, k: 2, ..SystemConfig::default() };
        let cat = default_catalog(&cfg.geometry()).unwrap();
        let pats = [cat[3].clone(), cat[6].clone()];
        let t = build_lookup(
            &cfg,
            &LookupGrids { ul_patterns: &pats, dl_patterns: &pats, n_b: &[0.0, 6.0], v_kmh: &[10.0], tau_max_us: &[1.0] },
        )
        .unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                let real = shared_realizations(&cfg, 5, 42).unwrap();
                sweep(&cfg, &t, &pats, &pats, &[0.0, 6.0], &real).unwrap()
            })
        };
        assert_eq!(run(1), run(3));
    }
}
