//! Zero-order Bessel function of the first kind and the `si` kernel.

use crate::error::{invalid, Result};
use std::f64::consts::{FRAC_PI_4, PI};

/// Below this argument the power series is used directly; the largest
/// intermediate term stays near 1e2, so cancellation costs < 1e-13.
const SERIES_LIMIT: f64 = 8.0;
/// Above this argument the Hankel expansion is accurate to machine precision.
const ASYMPTOTIC_LIMIT: f64 = 1000.0;

/// `J0(x)`, absolute error below 1e-13 on `|x| <= 1000`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid(format!("bessel_j0 argument must be finite, got {x}")));
    }
    Ok(j0_unchecked(x))
}

/// `J0` without the finiteness check, for hot loops over validated inputs.
pub(crate) fn j0_unchecked(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        j0_series(x)
    } else if x <= ASYMPTOTIC_LIMIT {
        j0_miller(x)
    } else {
        j0_hankel(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Backward recurrence normalised by `1 = J0 + 2 * sum_k J_{2k}`.
fn j0_miller(x: f64) -> f64 {
    let start = x + 20.0 * x.cbrt() + 40.0;
    let mut m = start.ceil() as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1.0; // J_k, arbitrary scale
    let mut even_sum = cur; // m is even
    for k in (1..=m).rev() {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        let order = k - 1;
        if order > 0 && order % 2 == 0 {
            even_sum += cur;
        }
        if cur.abs() > 1e200 {
            cur *= 1e-200;
            next *= 1e-200;
            even_sum *= 1e-200;
        }
    }
    cur / (cur + 2.0 * even_sum)
}

fn j0_hankel(x: f64) -> f64 {
    // u_k = prod_{j<=k} (2j-1)^2 / (k! 8^k); P and Q alternate over even/odd k.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut u = 1.0;
    let mut xpow = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60usize {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            u *= odd * odd / (k as f64 * 8.0);
            xpow *= x;
        }
        let t = u / xpow;
        if t > last {
            break;
        }
        last = t;
        match k % 4 {
            0 => p += t,
            1 => q -= t,
            2 => p -= t,
            _ => q += t,
        }
        if t < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `si(x) = sin(x) / x` with `si(0) = 1`.
pub fn si(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
