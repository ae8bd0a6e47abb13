//! Sum-rate lower bounds under imperfect CSI: uplink MAC, downlink broadcast
//! channel through its dual uplink, and the TDM random-beamforming fallback.
//!
//! Rates are in bits per channel access. Channel matrices are `N_BS x K`
//! with one column per terminal.

use crate::error::{invalid, Result};
use crate::numerics::ComplexMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Line searches stop once an improvement sweep gains less than this.
pub const RATE_TOL: f64 = 1e-7;
pub const MAX_SWEEPS: usize = 200;
/// Golden-section bracket is shrunk to this fraction of its initial width.
const LINE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub sigma_ul2: f64,
    pub sigma_dl2: f64,
    pub sigma_p2: f64,
    /// Per-terminal uplink power cap.
    pub p_max_ul: f64,
    /// Base-station sum power.
    pub p_tot_dl: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { sigma_ul2: 0.1, sigma_dl2: 0.1, sigma_p2: 0.1, p_max_ul: 1.0, p_tot_dl: 1.0 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_ul2", self.sigma_ul2), ("sigma_dl2", self.sigma_dl2), ("sigma_p2", self.sigma_p2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("p_max_ul", self.p_max_ul), ("p_tot_dl", self.p_tot_dl)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveUplink {
    pub h_eff: ComplexMatrix,
    /// Standard deviation of the estimation-error interference per entry.
    pub e_bar: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveDownlink {
    pub h_eff: ComplexMatrix,
    pub e_ut: DMatrix<f64>,
    pub e_bs: DMatrix<f64>,
}

/// Effective scalar channels of TDM with random beamforming.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmEffective {
    pub h_eff: Vec<Complex64>,
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
}

fn check_channel(h: &ComplexMatrix, variance: f64) -> Result<()> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(invalid("channel matrix must be non-empty"));
    }
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(invalid("channel variance must be positive"));
    }
    Ok(())
}

fn check_noise(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be finite and nonnegative, got {v}")));
    }
    Ok(())
}

/// Uplink channel shrunk by the receiver's estimation noise `sigma_ul_bs`.
pub fn ul_effective_params(h: &ComplexMatrix, variance: f64, sigma_ul_bs: f64) -> Result<EffectiveUplink> {
    check_channel(h, variance)?;
    check_noise("sigma_ul_bs", sigma_ul_bs)?;
    let scale = 1.0 / (1.0 + sigma_ul_bs / variance).sqrt();
    let e = (variance * sigma_ul_bs / (variance + sigma_ul_bs)).sqrt();
    Ok(EffectiveUplink {
        h_eff: h.map(|z| z * scale),
        e_bar: DMatrix::from_element(h.nrows(), h.ncols(), e),
    })
}

/// Downlink effective channel and the terminal- and BS-side error levels.
pub fn dl_effective_params(h: &ComplexMatrix, variance: f64, sigma_dl_ut: f64, sigma_dl_bs: f64) -> Result<EffectiveDownlink> {
    check_channel(h, variance)?;
    check_noise("sigma_dl_ut", sigma_dl_ut)?;
    check_noise("sigma_dl_bs", sigma_dl_bs)?;
    let denom = variance + sigma_dl_ut;
    let scale = ((variance - sigma_dl_bs).max(0.0) / denom).sqrt();
    let e_ut = (variance * sigma_dl_ut / denom).sqrt();
    let e_bs = (sigma_dl_bs * variance * variance / denom).sqrt();
    let (n, k) = h.shape();
    Ok(EffectiveDownlink {
        h_eff: h.map(|z| z * scale),
        e_ut: DMatrix::from_element(n, k, e_ut),
        e_bs: DMatrix::from_element(n, k, e_bs),
    })
}

/// In-place lower Cholesky of a Hermitian positive definite `n x n` row-major
/// matrix. Returns `ln det`, or `None` when not positive definite.
fn cholesky(a: &mut [Complex64], n: usize) -> Option<f64> {
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = Complex64::new(d, 0.0);
        logdet += 2.0 * d.ln();
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / d;
        }
    }
    Some(logdet)
}

/// `b^H A^-1 b` given the Cholesky factor of `A`.
fn quad_form_inv(l: &[Complex64], n: usize, b: &[Complex64], work: &mut [Complex64]) -> f64 {
    // forward solve L y = b; then b^H A^-1 b = |y|^2
    let mut acc = 0.0;
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * work[k];
        }
        work[i] = s / l[i * n + i].re;
        acc += work[i].norm_sqr();
    }
    acc
}

fn columns(h: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    (0..h.ncols()).map(|k| h.column(k).iter().copied().collect()).collect()
}

/// Adds `w * x x^H` to a row-major `n x n` buffer.
fn add_outer(a: &mut [Complex64], n: usize, x: &[Complex64], w: f64) {
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += x[i] * x[j].conj() * w;
        }
    }
}

struct UplinkObjective {
    n: usize,
    cols: Vec<Vec<Complex64>>,
    /// `e_bar^2` per entry, row-major `n x K`.
    e2: Vec<f64>,
    sigma2: f64,
    buf: Vec<Complex64>,
}

impl UplinkObjective {
    fn new(eff: &EffectiveUplink, sigma2: f64) -> Self {
        let (n, k) = eff.h_eff.shape();
        let e2 = (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| eff.e_bar[(i, j)].powi(2)).collect();
        Self { n, cols: columns(&eff.h_eff), e2, sigma2, buf: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    fn rate(&mut self, p: &[f64]) -> f64 {
        let n = self.n;
        let k = self.cols.len();
        self.buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let mut log_phi = 0.0;
        for i in 0..n {
            let phi: f64 = self.sigma2 + (0..k).map(|j| self.e2[i * k + j] * p[j]).sum::<f64>();
            self.buf[i * n + i] = Complex64::new(phi, 0.0);
            log_phi += phi.ln();
        }
        for (col, &pk) in self.cols.iter().zip(p) {
            add_outer(&mut self.buf, n, col, pk);
        }
        let logdet = cholesky(&mut self.buf, n).expect("noise covariance is positive definite");
        ((logdet - log_phi) / std::f64::consts::LN_2).max(0.0)
    }
}

/// `log2 |I + Phi^-1 H P H^H|` for a fixed power vector.
pub fn ul_rate_at(eff: &EffectiveUplink, sigma_ul2: f64, powers: &[f64]) -> Result<f64> {
    if powers.len() != eff.h_eff.ncols() {
        return Err(invalid("one uplink power per terminal required"));
    }
    check_noise("sigma_ul2", sigma_ul2)?;
    if sigma_ul2 == 0.0 {
        return Err(invalid("uplink noise power must be positive"));
    }
    Ok(UplinkObjective::new(eff, sigma_ul2).rate(powers))
}

/// Golden-section maximisation of `f` on `[a, b]`, also checking both ends.
fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let fa = f(a);
    let fb = f(b);
    let mut best = if fb > fa { (b, fb) } else { (a, fa) };
    if b - a <= 0.0 {
        return best;
    }
    let tol = LINE_TOL * (b - a);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    for cand in [(x1, f1), (x2, f2)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Uplink sum rate maximised over per-terminal powers in `[0, p_max]`.
pub fn ul_sum_rate(eff: &EffectiveUplink, sigma_ul2: f64, p_max: f64) -> Result<(f64, PowerAllocation)> {
    check_noise("p_max", p_max)?;
    if !(sigma_ul2 > 0.0 && sigma_ul2.is_finite()) {
        return Err(invalid("uplink noise power must be positive"));
    }
    let k = eff.h_eff.ncols();
    let mut obj = UplinkObjective::new(eff, sigma_ul2);
    let mut p = vec![p_max; k];
    let mut cur = obj.rate(&p);
    // Without estimation noise the log-det is monotone in every power.
    if eff.e_bar.iter().all(|&e| e == 0.0) || p_max == 0.0 {
        return Ok((cur, PowerAllocation { powers: p }));
    }
    for _ in 0..MAX_SWEEPS {
        let before = cur;
        for t in 0..k {
            let (x, fx) = golden_max(
                |x| {
                    let old = p[t];
                    p[t] = x;
                    let r = obj.rate(&p);
                    p[t] = old;
                    r
                },
                0.0,
                p_max,
            );
            if fx > cur {
                p[t] = x;
                cur = fx;
            }
        }
        if cur - before < RATE_TOL {
            break;
        }
    }
    Ok((cur, PowerAllocation { powers: p }))
}

struct DownlinkObjective {
    n: usize,
    cols: Vec<Vec<Complex64>>,
    e_ut2: Vec<f64>,
    e_bs2: Vec<f64>,
    sigma2: f64,
    buf: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl DownlinkObjective {
    fn new(eff: &EffectiveDownlink, sigma2: f64) -> Self {
        let (n, k) = eff.h_eff.shape();
        // Delta(e e^H) is diagonal; with uniform error levels per column the
        // diagonal entry for receive antenna i is e(i, j)^2.
        let flat = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).collect()
        };
        Self {
            n,
            cols: columns(&eff.h_eff),
            e_ut2: flat(&eff.e_ut),
            e_bs2: flat(&eff.e_bs),
            sigma2,
            buf: vec![Complex64::new(0.0, 0.0); n * n],
            work: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn rate(&mut self, p: &[f64]) -> f64 {
        let n = self.n;
        let k = self.cols.len();
        let mut total = 0.0;
        for t in 0..k {
            if p[t] <= 0.0 {
                continue;
            }
            self.buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for i in 0..n {
                let mut c = self.sigma2;
                for j in 0..k {
                    c += p[j] * self.e_ut2[i * k + j];
                    if j != t {
                        c += p[j] * self.e_bs2[i * k + j];
                    }
                }
                self.buf[i * n + i] = Complex64::new(c, 0.0);
            }
            for j in 0..k {
                if j != t && p[j] > 0.0 {
                    add_outer(&mut self.buf, n, &self.cols[j], p[j]);
                }
            }
            cholesky(&mut self.buf, n).expect("interference-plus-noise covariance is positive definite");
            let q = quad_form_inv(&self.buf, n, &self.cols[t], &mut self.work);
            total += (p[t] * q).ln_1p();
        }
        total / std::f64::consts::LN_2
    }
}

/// Dual-uplink downlink sum rate for a fixed power vector.
pub fn dl_rate_at(eff: &EffectiveDownlink, sigma_dl2: f64, powers: &[f64]) -> Result<f64> {
    if powers.len() != eff.h_eff.ncols() {
        return Err(invalid("one dual power per terminal required"));
    }
    if !(sigma_dl2 > 0.0 && sigma_dl2.is_finite()) {
        return Err(invalid("downlink noise power must be positive"));
    }
    Ok(DownlinkObjective::new(eff, sigma_dl2).rate(powers))
}

/// Downlink sum rate maximised over dual powers with `sum p <= p_tot`.
///
/// Scaling all dual powers up raises every SINR, so the optimum lies on
/// `sum p = p_tot`; the search moves power between pairs of terminals
/// starting from the uniform split and from every vertex.
pub fn dl_sum_rate(eff: &EffectiveDownlink, sigma_dl2: f64, p_tot: f64) -> Result<(f64, PowerAllocation)> {
    check_noise("p_tot", p_tot)?;
    if !(sigma_dl2 > 0.0 && sigma_dl2.is_finite()) {
        return Err(invalid("downlink noise power must be positive"));
    }
    let k = eff.h_eff.ncols();
    if p_tot == 0.0 || eff.h_eff.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok((0.0, PowerAllocation { powers: vec![0.0; k] }));
    }
    let mut obj = DownlinkObjective::new(eff, sigma_dl2);
    let mut starts = vec![vec![p_tot / k as f64; k]];
    if k > 1 {
        for v in 0..k {
            let mut s = vec![0.0; k];
            s[v] = p_tot;
            starts.push(s);
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mut p in starts {
        let mut cur = obj.rate(&p);
        for _ in 0..MAX_SWEEPS {
            let before = cur;
            for i in 0..k {
                for j in i + 1..k {
                    let s = p[i] + p[j];
                    if s <= 0.0 {
                        continue;
                    }
                    let (x, fx) = golden_max(
                        |x| {
                            let (oi, oj) = (p[i], p[j]);
                            p[i] = x;
                            p[j] = s - x;
                            let r = obj.rate(&p);
                            p[i] = oi;
                            p[j] = oj;
                            r
                        },
                        0.0,
                        s,
                    );
                    if fx > cur {
                        p[i] = x;
                        p[j] = s - x;
                        cur = fx;
                    }
                }
            }
            if cur - before < RATE_TOL {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cur > *b) {
            best = Some((cur, p));
        }
    }
    let (rate, powers) = best.expect("at least one start");
    Ok((rate, PowerAllocation { powers }))
}

/// Effective TDM channels: a uniform random beam of total power `p_tot`
/// towards each terminal in turn.
pub fn tdm_effective(h: &ComplexMatrix, variance: f64, sigma_dl_ut: f64, p_tot: f64) -> Result<TdmEffective> {
    check_channel(h, variance)?;
    check_noise("sigma_dl_ut (TDM)", sigma_dl_ut)?;
    check_noise("p_tot", p_tot)?;
    let n_bs = h.nrows() as f64;
    let per_antenna = p_tot / n_bs;
    // E{h_k^H h_k} over the N_BS entries of one terminal
    let signal = per_antenna * n_bs * variance;
    let shrink = if signal + sigma_dl_ut > 0.0 { (signal / (signal + sigma_dl_ut)).sqrt() } else { 0.0 };
    let noise = if signal + sigma_dl_ut > 0.0 { sigma_dl_ut / (signal + sigma_dl_ut) } else { 0.0 };
    let h_eff = (0..h.ncols())
        .map(|k| h.column(k).iter().sum::<Complex64>() * per_antenna.sqrt() * shrink)
        .collect();
    Ok(TdmEffective { h_eff, noise: vec![noise; h.ncols()] })
}

/// Average TDM rate `(1/K) sum_k log2(1 + |h_eff,k|^2 / (sigma_TDM,k + sigma_DL^2))`.
pub fn tdm_sum_rate(h: &ComplexMatrix, variance: f64, sigma_dl_ut: f64, sigma_dl2: f64, p_tot: f64) -> Result<f64> {
    if !(sigma_dl2 > 0.0 && sigma_dl2.is_finite()) {
        return Err(invalid("downlink noise power must be positive"));
    }
    let eff = tdm_effective(h, variance, sigma_dl_ut, p_tot)?;
    let k = eff.h_eff.len() as f64;
    Ok(eff
        .h_eff
        .iter()
        .zip(&eff.noise)
        .map(|(g, s)| (1.0 + g.norm_sqr() / (s + sigma_dl2)).log2())
        .sum::<f64>()
        / k)
}
