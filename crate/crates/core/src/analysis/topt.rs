//! Critical slowing down: `t_opt ∼ N^μ |p - p_c|^{-γ}` and the Δ dependence.

use serde::{Deserialize, Serialize};

use super::fit::{fit_power_law, ScalingFit};
use crate::error::Result;

pub const DEFAULT_N_REF: f64 = 5000.0;
/// Reference sizes used to report the sensitivity of γ.
pub const N_REF_RANGE: [f64; 2] = [1e3, 1e4];

/// One `t_opt` measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToptPoint {
    pub p: f64,
    pub n_spins: f64,
    pub t_opt: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuFit {
    pub p: f64,
    pub fit: Option<ScalingFit>,
    /// Fitted `t_opt(N_ref)` and its error.
    pub t_ref: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToptScaling {
    pub n_ref: f64,
    pub p_c: f64,
    pub mu: Vec<MuFit>,
    /// The p nearest p_c, left out of the γ fit.
    pub excluded_p: Option<f64>,
    /// `γ` is the decay exponent of this fit.
    pub gamma: Option<ScalingFit>,
    /// γ fits at the ends of the reference range.
    pub sensitivity: Vec<(f64, Option<ScalingFit>)>,
}

fn gamma_fit(mu: &[MuFit], p_c: f64, n_ref: f64) -> Result<(Option<f64>, Option<ScalingFit>)> {
    let mut usable: Vec<(f64, f64, f64)> = mu
        .iter()
        .filter_map(|m| m.fit.as_ref().map(|f| (m.p, f.predict(n_ref))))
        .map(|(p, (t, e))| (p, t, e))
        .collect();
    let nearest = usable
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 .0 - p_c).abs().total_cmp(&(b.1 .0 - p_c).abs()))
        .map(|(i, _)| i);
    let excluded = nearest.map(|i| usable.remove(i).0);
    let xs: Vec<f64> = usable.iter().map(|u| (u.0 - p_c).abs()).collect();
    let ys: Vec<f64> = usable.iter().map(|u| u.1).collect();
    let es: Vec<f64> = usable.iter().map(|u| u.2).collect();
    Ok((excluded, fit_power_law(&xs, &ys, &es)?))
}

/// Fit μ for every p, then γ from `t_opt(N_ref)` against `|p - p_c|`.
pub fn fit_topt_scaling(points: &[ToptPoint], p_c: f64, n_ref: f64) -> Result<ToptScaling> {
    let mut ps: Vec<f64> = points.iter().map(|x| x.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut mu = Vec::with_capacity(ps.len());
    for &p in &ps {
        let sel: Vec<&ToptPoint> = points.iter().filter(|x| x.p == p).collect();
        let xs: Vec<f64> = sel.iter().map(|x| x.n_spins).collect();
        let ys: Vec<f64> = sel.iter().map(|x| x.t_opt).collect();
        let es: Vec<f64> = sel.iter().map(|x| x.err).collect();
        let fit = fit_power_law(&xs, &ys, &es)?;
        let t_ref = fit.as_ref().map(|f| f.predict(n_ref));
        mu.push(MuFit { p, fit, t_ref });
    }
    let (excluded_p, gamma) = gamma_fit(&mu, p_c, n_ref)?;
    let sensitivity = N_REF_RANGE
        .iter()
        .map(|&n| gamma_fit(&mu, p_c, n).map(|(_, g)| (n, g)))
        .collect::<Result<_>>()?;
    Ok(ToptScaling {
        n_ref,
        p_c,
        mu,
        excluded_p,
        gamma,
        sensitivity,
    })
}

/// Power law of `t_opt` against `1 - Δ` at fixed p and N; the slope is the
/// exponent (−1 for `t_opt ∼ (1 - Δ)^{-1}`).
pub fn fit_topt_vs_delta(deltas: &[f64], t_opts: &[f64], errs: &[f64]) -> Result<Option<ScalingFit>> {
    let xs: Vec<f64> = deltas.iter().map(|d| 1.0 - d).collect();
    fit_power_law(&xs, t_opts, errs)
}
