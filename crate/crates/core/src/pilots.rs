//! Pilot layouts inside one PRB and their selection matrices.

use crate::channel::PrbGeometry;
use crate::error::{invalid, Result};
use crate::numerics::ComplexMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    /// Same subcarrier set on every pilot symbol.
    Rect,
    /// Every other pilot symbol shifted by half the frequency spacing.
    Diamond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPattern {
    pub id: String,
    pub kind: LatticeKind,
    pub dt: usize,
    pub df: usize,
    /// `(symbol, subcarrier)` offset of the first lattice point.
    pub offset: (usize, usize),
    #[serde(skip)]
    pub geometry: PrbGeometry,
    /// Sorted by stacked (symbol-major) index.
    #[serde(skip)]
    pub positions: Vec<(usize, usize)>,
}

impl PilotPattern {
    pub fn n_pilots(&self) -> usize {
        self.positions.len()
    }

    /// Fraction of PRB resource elements carrying pilots.
    pub fn density(&self) -> f64 {
        self.positions.len() as f64 / self.geometry.block_len() as f64
    }

    /// Stacked indices of the pilot positions, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.positions
            .iter()
            .map(|&(s, c)| self.geometry.stacked_index(s, c))
            .collect()
    }

    /// True when every pilot of `self` is also a pilot of `other`.
    pub fn is_subset_of(&self, other: &PilotPattern) -> bool {
        self.positions.iter().all(|p| other.positions.contains(p))
    }
}

/// Serializable summary of a pattern, as written to catalog files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub id: String,
    pub kind: LatticeKind,
    pub dt: usize,
    pub df: usize,
    pub offset: (usize, usize),
    pub n_pilots: usize,
    pub density: f64,
}

impl From<&PilotPattern> for PatternSummary {
    fn from(p: &PilotPattern) -> Self {
        Self {
            id: p.id.clone(),
            kind: p.kind,
            dt: p.dt,
            df: p.df,
            offset: p.offset,
            n_pilots: p.n_pilots(),
            density: p.density(),
        }
    }
}

/// Rectangular lattice `{(offset_t + a dt, offset_f + b df)}` clipped to the PRB.
pub fn lattice_pattern(geom: &PrbGeometry, dt: usize, df: usize, offset: (usize, usize)) -> Result<PilotPattern> {
    build(geom, LatticeKind::Rect, dt, df, offset)
}

/// Diamond lattice: rows at `offset_t + a dt`, odd rows shifted by `df / 2`.
pub fn diamond_pattern(geom: &PrbGeometry, dt: usize, df: usize, offset: (usize, usize)) -> Result<PilotPattern> {
    build(geom, LatticeKind::Diamond, dt, df, offset)
}

fn build(geom: &PrbGeometry, kind: LatticeKind, dt: usize, df: usize, offset: (usize, usize)) -> Result<PilotPattern> {
    geom.validate()?;
    if dt == 0 || df == 0 {
        return Err(invalid("pilot spacings must be at least 1"));
    }
    if offset.0 >= dt || offset.1 >= df {
        return Err(invalid(format!(
            "pilot offset {offset:?} must lie within the spacing ({dt}, {df})"
        )));
    }
    let mut positions = Vec::new();
    for (row, s) in (offset.0..geom.n_symbols).step_by(dt).enumerate() {
        let shift = match kind {
            LatticeKind::Rect => 0,
            LatticeKind::Diamond => (row % 2) * (df / 2),
        };
        for c in (offset.1 + shift..geom.n_subcarriers).step_by(df) {
            positions.push((s, c));
        }
    }
    if positions.is_empty() {
        return Err(invalid(format!(
            "pattern ({dt}, {df}) with offset {offset:?} has no pilot inside the PRB"
        )));
    }
    positions.sort_by_key(|&(s, c)| geom.stacked_index(s, c));
    let tag = match kind {
        LatticeKind::Rect => "rect",
        LatticeKind::Diamond => "diamond",
    };
    Ok(PilotPattern {
        id: format!("{tag}-{dt}x{df}+{}.{}", offset.0, offset.1),
        kind,
        dt,
        df,
        offset,
        geometry: *geom,
        positions,
    })
}

/// `N_ppos x L` 0/1 matrix with one row per pilot.
pub fn selection_matrix(pattern: &PilotPattern) -> ComplexMatrix {
    let l = pattern.geometry.block_len();
    let mut s = ComplexMatrix::zeros(pattern.n_pilots(), l);
    for (row, idx) in pattern.indices().into_iter().enumerate() {
        s[(row, idx)] = Complex64::new(1.0, 0.0);
    }
    s
}

/// Offset that centres a lattice with spacing `step` on an axis of `len` points.
fn centred_offset(len: usize, step: usize) -> usize {
    let count = (len - 1) / step + 1;
    let span = (count - 1) * step;
    (len - 1 - span) / 2
}

/// Lattice centred inside the PRB.
pub fn centred_pattern(geom: &PrbGeometry, kind: LatticeKind, dt: usize, df: usize) -> Result<PilotPattern> {
    geom.validate()?;
    if dt == 0 || df == 0 {
        return Err(invalid("pilot spacings must be at least 1"));
    }
    let offset = (
        centred_offset(geom.n_symbols, dt).min(dt - 1),
        centred_offset(geom.n_subcarriers, df).min(df - 1),
    );
    build(geom, kind, dt, df, offset)
}

/// Spacings of the sweep catalog for the 14 x 12 PRB. Pilot counts
/// 1, 2, 3, 4, 6, 8, 9, 12, 16, 20, 30 give densities from 1/168 to 0.179.
const CATALOG: &[(LatticeKind, usize, usize)] = &[
    (LatticeKind::Rect, 14, 12),
    (LatticeKind::Rect, 7, 12),
    (LatticeKind::Rect, 14, 4),
    (LatticeKind::Diamond, 7, 6),
    (LatticeKind::Diamond, 7, 4),
    (LatticeKind::Diamond, 7, 3),
    (LatticeKind::Diamond, 5, 4),
    (LatticeKind::Diamond, 4, 4),
    (LatticeKind::Diamond, 4, 3),
    (LatticeKind::Diamond, 3, 3),
    (LatticeKind::Diamond, 3, 2),
];

/// The fixed sweep catalog: centred lattices, ascending and pairwise distinct
/// densities.
pub fn default_catalog(geom: &PrbGeometry) -> Result<Vec<PilotPattern>> {
    let mut out = Vec::with_capacity(CATALOG.len());
    for &(kind, dt, df) in CATALOG {
        let dt = dt.min(geom.n_symbols);
        let df = df.min(geom.n_subcarriers);
        out.push(centred_pattern(geom, kind, dt, df)?);
    }
    out.sort_by_key(|p| p.n_pilots());
    out.dedup_by_key(|p| p.n_pilots());
    Ok(out)
}

/// Checks that a catalog is non-empty, shares one geometry and has distinct
/// densities (the lookup table is indexed by density).
pub fn validate_catalog(patterns: &[PilotPattern]) -> Result<()> {
    let first = patterns.first().ok_or_else(|| invalid("pattern catalog is empty"))?;
    for p in patterns {
        if p.geometry != first.geometry {
            return Err(invalid("catalog patterns must share one PRB geometry"));
        }
    }
    let mut counts: Vec<usize> = patterns.iter().map(|p| p.n_pilots()).collect();
    counts.sort_unstable();
    if counts.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("catalog densities must be pairwise distinct"));
    }
    Ok(())
}
