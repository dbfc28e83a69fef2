//! Threshold crossings of exponent rows and phase-diagram assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold on both α and ν.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Which side of the threshold is the ordered phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderedSide {
    /// Ordered where the exponent exceeds the threshold (ν).
    Above,
    /// Ordered where the exponent is below the threshold (α).
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Crossing,
    /// The whole row is ordered; `p_c` exceeds the largest p.
    LowerBound,
    /// The whole row is disordered; `p_c` lies below the smallest p.
    UpperBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub kind: BoundaryKind,
    pub p_c: f64,
    pub dp_c: f64,
}

/// One point of an exponent row: `(p, y, δy)`.
pub type RowPoint = (f64, f64, f64);

/// Linear interpolation of the first crossing of `threshold` along a row
/// ordered by increasing p, with
/// `δp_c² = (Δp/Δy)² (t² δy_l² + (1-t)² δy_r²) + (Δp/2)²`.
pub fn extract_pc(row: &[RowPoint], threshold: f64, side: OrderedSide) -> Result<BoundaryEstimate> {
    if row.is_empty() {
        return Err(Error::Analysis("empty exponent row".into()));
    }
    if row.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::Analysis("exponent row must be strictly increasing in p".into()));
    }
    let d: Vec<f64> = row.iter().map(|r| r.1 - threshold).collect();
    for k in 0..row.len().saturating_sub(1) {
        if d[k] * d[k + 1] <= 0.0 && !(d[k] == 0.0 && d[k + 1] == 0.0) {
            let (pl, yl, el) = row[k];
            let (pr, yr, er) = row[k + 1];
            let p_c = pl + (threshold - yl) * (pr - pl) / (yr - yl);
            let t = (p_c - pl) / (pr - pl);
            let half = 0.5 * (pr - pl);
            let lever = ((pr - pl) / (yr - yl)).powi(2);
            let dp2 = lever * (t * t * el * el + (1.0 - t).powi(2) * er * er) + half * half;
            return Ok(BoundaryEstimate {
                kind: BoundaryKind::Crossing,
                p_c,
                dp_c: dp2.sqrt(),
            });
        }
    }
    let ordered = match side {
        OrderedSide::Above => d[0] > 0.0,
        OrderedSide::Below => d[0] < 0.0,
    };
    let n = row.len();
    let edge_half = |a: usize, b: usize| 0.5 * (row[b].0 - row[a].0).abs();
    Ok(if ordered {
        BoundaryEstimate {
            kind: BoundaryKind::LowerBound,
            p_c: row[n - 1].0,
            dp_c: if n > 1 { edge_half(n - 2, n - 1) } else { 0.0 },
        }
    } else {
        BoundaryEstimate {
            kind: BoundaryKind::UpperBound,
            p_c: row[0].0,
            dp_c: if n > 1 { edge_half(0, 1) } else { 0.0 },
        }
    })
}

/// Exponents at one `(p, Δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub delta: f64,
    pub alpha: Option<(f64, f64)>,
    pub nu: Option<(f64, f64)>,
    /// Some late-time magnetization failed the convergence gate.
    pub hatched: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub delta: f64,
    pub diagnostic: String,
    pub threshold: f64,
    pub estimate: BoundaryEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub grid: Vec<PhasePoint>,
    pub boundaries: Vec<BoundaryRow>,
}

/// Sort the grid and extract per-Δ boundaries from ν and from α separately.
pub fn assemble_phase_diagram(points: &[PhasePoint], nu_threshold: f64, alpha_threshold: f64) -> Result<PhaseDiagram> {
    let mut grid = points.to_vec();
    grid.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.p.total_cmp(&b.p)));
    let mut rows: BTreeMap<u64, Vec<&PhasePoint>> = BTreeMap::new();
    for pt in &grid {
        // Order-preserving key for f64.
        let bits = pt.delta.to_bits();
        let key = if pt.delta.is_sign_negative() {
            !bits
        } else {
            bits | (1 << 63)
        };
        rows.entry(key).or_default().push(pt);
    }
    let mut boundaries = Vec::new();
    for row in rows.values() {
        let delta = row[0].delta;
        let diagnostics: [(&str, f64, OrderedSide, fn(&PhasePoint) -> Option<(f64, f64)>); 2] = [
            ("nu", nu_threshold, OrderedSide::Above, |p| p.nu),
            ("alpha", alpha_threshold, OrderedSide::Below, |p| p.alpha),
        ];
        for (name, threshold, side, get) in diagnostics {
            let values: Vec<RowPoint> = row.iter().filter_map(|p| get(p).map(|(v, e)| (p.p, v, e))).collect();
            if values.is_empty() {
                continue;
            }
            boundaries.push(BoundaryRow {
                delta,
                diagnostic: name.to_string(),
                threshold,
                estimate: extract_pc(&values, threshold, side)?,
            });
        }
    }
    Ok(PhaseDiagram { grid, boundaries })
}
