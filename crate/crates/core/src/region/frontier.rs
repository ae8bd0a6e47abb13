//! Pareto frontier, time-sharing hull and weighted optimum in the
//! (net UL, net DL) plane.

use super::RatePoint;
use crate::error::{invalid, Result};
use std::cmp::Ordering;

fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Indices of the non-dominated points, ordered by decreasing net UL rate.
/// Of several points at the same coordinates only the one with the smallest
/// parameter id is kept.
pub fn pareto_frontier(points: &[RatePoint]) -> Vec<usize> {
    let ids: Vec<String> = points.iter().map(|p| p.params.id()).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pb.net_ul
            .total_cmp(&pa.net_ul)
            .then(pb.net_dl.total_cmp(&pa.net_dl))
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let mut best_dl = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for i in order {
        if points[i].net_dl > best_dl {
            best_dl = points[i].net_dl;
            out.push(i);
        }
    }
    out
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Upper-right convex hull of `points` together with the axis anchors
/// `(max x, 0)` and `(0, max y)`, from the DL axis to the UL axis.
/// Collinear interior points are dropped.
pub fn convex_region(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.is_empty() {
        return Vec::new();
    }
    let x_max = points.iter().fold(0.0_f64, |m, p| m.max(p.0));
    let y_max = points.iter().fold(0.0_f64, |m, p| m.max(p.1));
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.push((0.0, y_max));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    // one point per abscissa, the highest
    pts.dedup_by(|next, kept| next.0 == kept.0);

    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() + 1);
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) >= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    // drop the descending tail's collinear points with the UL anchor
    let anchor = (x_max, 0.0);
    if hull.last() != Some(&anchor) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], anchor) >= 0.0 {
            hull.pop();
        }
        hull.push(anchor);
    }
    hull
}

/// True when `p` lies on or below the hull polyline (within `tol`).
pub fn below_hull(hull: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
    if p.0 < -tol || p.1 < -tol {
        return true;
    }
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if p.0 >= a.0 - tol && p.0 <= b.0 + tol {
            if b.0 - a.0 <= tol {
                if p.1 <= a.1.max(b.1) + tol {
                    return true;
                }
                continue;
            }
            // clockwise from a to b keeps p underneath
            if cross(a, b, p) <= tol * (1.0 + (b.0 - a.0).abs() + (b.1 - a.1).abs()) {
                return true;
            }
        }
    }
    false
}

/// Point maximising `w * net_ul + (1 - w) * net_dl`.
///
/// Among points with equal objective, points dominated by another tied
/// point are discarded first; remaining ties go to the smaller `N_b`, then
/// the smaller DL density, then the smaller parameter id.
pub fn weighted_optimum(points: &[RatePoint], w: f64) -> Result<&RatePoint> {
    if points.is_empty() {
        return Err(invalid("weighted_optimum needs at least one point"));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(invalid(format!("weight must lie in [0, 1], got {w}")));
    }
    let obj = |p: &RatePoint| w * p.net_ul + (1.0 - w) * p.net_dl;
    let best = points.iter().map(obj).fold(f64::NEG_INFINITY, f64::max);
    let eps = 1e-12 * best.abs().max(1.0);
    let tied: Vec<&RatePoint> = points.iter().filter(|p| obj(p) >= best - eps).collect();
    let xy = |p: &RatePoint| (p.net_ul, p.net_dl);
    let undominated = tied.iter().filter(|p| !tied.iter().any(|q| dominates(xy(q), xy(p))));
    let pick = undominated
        .min_by(|a, b| {
            a.params
                .n_b
                .total_cmp(&b.params.n_b)
                .then(a.params.rho_dl.total_cmp(&b.params.rho_dl))
                .then_with(|| a.params.id().cmp(&b.params.id()))
        })
        .copied()
        .expect("the tied set always holds an undominated point");
    Ok(pick)
}

/// Ordering helper for reporting: larger objective first.
pub fn compare_objective(a: &RatePoint, b: &RatePoint, w: f64) -> Ordering {
    let f = |p: &RatePoint| w * p.net_ul + (1.0 - w) * p.net_dl;
    f(b).total_cmp(&f(a))
}
