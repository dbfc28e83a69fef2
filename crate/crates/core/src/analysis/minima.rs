//! Squeezing minima: detection under sampling noise and selection of the
//! minimum whose time grows with system size.

use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, ScalingFit, MIN_POINTS};
use super::Series;
use crate::error::{Error, Result};

/// Minima earlier than this (units of 1/J) are not scalable candidates.
pub const DEFAULT_T_EXCLUDE: f64 = 5.0;
/// Half-width of the centred detection window.
const HALF_WINDOW: usize = 2;
/// Depth below both window edges, in combined standard errors.
const DEPTH_SIGMAS: f64 = 2.0;
/// Total relative rise of t_opt across sizes required for a growing family.
const MIN_RISE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub index: usize,
    pub t: f64,
    /// Half the local sample spacing.
    pub t_err: f64,
    pub value: f64,
    pub err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinimumClass {
    ScalableCandidate,
    EarlyTimeExcluded,
    GlobalFallback,
}

impl MinimumClass {
    pub fn tag(self) -> &'static str {
        match self {
            MinimumClass::ScalableCandidate => "scalable-candidate",
            MinimumClass::EarlyTimeExcluded => "early-time-excluded",
            MinimumClass::GlobalFallback => "global-fallback",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingExtract {
    #[serde(rename = "L")]
    pub size: usize,
    pub n_spins: f64,
    pub xi2_opt: f64,
    pub xi2_err: f64,
    pub t_opt: f64,
    pub t_opt_err: f64,
    pub class: MinimumClass,
    /// Every detected local minimum with its classification.
    pub minima: Vec<(Minimum, MinimumClass)>,
}

fn minimum_at(s: &Series, k: usize) -> Minimum {
    let lo = s.t[k.saturating_sub(1)];
    let hi = s.t[(k + 1).min(s.len() - 1)];
    let spacing = if k == 0 || k + 1 == s.len() {
        hi - lo
    } else {
        0.5 * (hi - lo)
    };
    Minimum {
        index: k,
        t: s.t[k],
        t_err: 0.5 * spacing,
        value: s.y[k],
        err: s.err[k],
    }
}

/// Local minima: smallest value of a centred 5-sample window that lies at
/// least two combined standard errors below both window edges.
pub fn detect_minima(s: &Series) -> Result<Vec<Minimum>> {
    if s.is_empty() {
        return Err(Error::Analysis("empty squeezing series".into()));
    }
    if s.reliable.iter().all(|r| !r) {
        return Err(Error::Analysis("every squeezing sample is flagged unreliable".into()));
    }
    let mut out = Vec::new();
    if s.len() < 2 * HALF_WINDOW + 1 {
        return Ok(out);
    }
    for k in HALF_WINDOW..s.len() - HALF_WINDOW {
        if !s.reliable[k] {
            continue;
        }
        let y = s.y[k];
        let window = k - HALF_WINDOW..=k + HALF_WINDOW;
        // Ties resolve to the earliest sample.
        let smallest = window
            .clone()
            .all(|j| j == k || (j < k && s.y[j] > y) || (j > k && s.y[j] >= y));
        if !smallest {
            continue;
        }
        let deep = [k - HALF_WINDOW, k + HALF_WINDOW].iter().all(|&e| {
            let gap = s.y[e] - y;
            gap > 0.0 && gap >= DEPTH_SIGMAS * s.err[e].hypot(s.err[k])
        });
        if deep {
            out.push(minimum_at(s, k));
        }
    }
    Ok(out)
}

fn global_minimum(s: &Series) -> Minimum {
    let k = (0..s.len())
        .filter(|&k| s.reliable[k])
        .min_by(|&a, &b| s.y[a].total_cmp(&s.y[b]))
        .expect("at least one reliable sample");
    minimum_at(s, k)
}

/// Longest chain (one candidate per size at most, sizes in order) with
/// non-decreasing t; ties go to the larger total rise.
fn growing_family(candidates: &[Vec<Minimum>]) -> Vec<Option<usize>> {
    // State: (size index, candidate index). best[s][c] = (length, first t, predecessor).
    let mut best: Vec<Vec<(usize, f64, Option<(usize, usize)>)>> = Vec::with_capacity(candidates.len());
    for (si, cands) in candidates.iter().enumerate() {
        let mut row = Vec::with_capacity(cands.len());
        for c in cands {
            let mut entry = (1, c.t, None);
            for (pj, prev) in best.iter().enumerate().take(si) {
                for (pc, &(len, first, _)) in prev.iter().enumerate() {
                    if candidates[pj][pc].t <= c.t {
                        let better = len + 1 > entry.0 || (len + 1 == entry.0 && first < entry.1);
                        if better {
                            entry = (len + 1, first, Some((pj, pc)));
                        }
                    }
                }
            }
            row.push(entry);
        }
        best.push(row);
    }
    let mut end: Option<(usize, usize)> = None;
    let mut end_key = (0usize, f64::NEG_INFINITY);
    for (si, row) in best.iter().enumerate() {
        for (ci, &(len, first, _)) in row.iter().enumerate() {
            let rise = candidates[si][ci].t / first;
            if len > end_key.0 || (len == end_key.0 && rise > end_key.1) {
                end_key = (len, rise);
                end = Some((si, ci));
            }
        }
    }
    let mut chosen = vec![None; candidates.len()];
    let mut chain = Vec::new();
    while let Some((si, ci)) = end {
        chosen[si] = Some(ci);
        chain.push(candidates[si][ci].t);
        end = best[si][ci].2;
    }
    let growing = match (chain.last(), chain.first()) {
        (Some(&first), Some(&last)) if chain.len() >= 2 => last >= (1.0 + MIN_RISE) * first,
        _ => chain.len() == 1 && candidates.len() == 1,
    };
    if growing {
        chosen
    } else {
        vec![None; candidates.len()]
    }
}

/// `ξ²_opt` and `t_opt` per size. `sizes` holds `(L, mean N, ξ² series)`
/// and is processed in order of increasing N.
pub fn extract_xi_opt(sizes: &[(usize, f64, Series)], t_exclude: f64) -> Result<Vec<SqueezingExtract>> {
    if sizes.is_empty() {
        return Err(Error::Analysis("no system sizes to analyze".into()));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[a].1.total_cmp(&sizes[b].1));

    let mut all = Vec::with_capacity(sizes.len());
    let mut candidates = Vec::with_capacity(sizes.len());
    for &i in &order {
        let minima = detect_minima(&sizes[i].2)?;
        candidates.push(minima.iter().copied().filter(|m| m.t >= t_exclude).collect::<Vec<_>>());
        all.push(minima);
    }
    let chosen = if candidates.iter().all(|c| c.len() == 1) {
        vec![Some(0); candidates.len()]
    } else {
        growing_family(&candidates)
    };

    let mut out = Vec::with_capacity(sizes.len());
    for (pos, &i) in order.iter().enumerate() {
        let (size, n_spins, ref series) = sizes[i];
        let (pick, class) = match chosen[pos] {
            Some(c) => (candidates[pos][c], MinimumClass::ScalableCandidate),
            None => (global_minimum(series), MinimumClass::GlobalFallback),
        };
        let minima = all[pos]
            .iter()
            .map(|m| {
                let c = if m.t < t_exclude {
                    MinimumClass::EarlyTimeExcluded
                } else if m.index == pick.index && class == MinimumClass::ScalableCandidate {
                    MinimumClass::ScalableCandidate
                } else {
                    MinimumClass::GlobalFallback
                };
                (*m, c)
            })
            .collect();
        out.push(SqueezingExtract {
            size,
            n_spins,
            xi2_opt: pick.value,
            xi2_err: pick.err,
            t_opt: pick.t,
            t_opt_err: pick.t_err,
            class,
            minima,
        });
    }
    Ok(out)
}

/// `ξ²_opt ∼ N^{-ν}`. Uses the scalable sizes when there are at least three;
/// when every size fell back, fits the global minima; otherwise no fit.
pub fn fit_nu(extracts: &[SqueezingExtract]) -> Result<Option<ScalingFit>> {
    let scalable: Vec<&SqueezingExtract> = extracts
        .iter()
        .filter(|e| e.class == MinimumClass::ScalableCandidate)
        .collect();
    let use_set: Vec<&SqueezingExtract> = if scalable.len() >= MIN_POINTS {
        scalable
    } else if scalable.is_empty() {
        extracts.iter().collect()
    } else {
        return Ok(None);
    };
    let xs: Vec<f64> = use_set.iter().map(|e| e.n_spins).collect();
    let ys: Vec<f64> = use_set.iter().map(|e| e.xi2_opt).collect();
    let errs: Vec<f64> = use_set.iter().map(|e| e.xi2_err).collect();
    fit_power_law(&xs, &ys, &errs)
}
