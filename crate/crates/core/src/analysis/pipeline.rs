//! Batch analysis over a result tree, grouped by `(p, Δ)` rows of sizes.

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::boundary::{assemble_phase_diagram, BoundaryKind, PhaseDiagram, PhasePoint, DEFAULT_THRESHOLD};
use super::fit::{fit_power_law, ScalingFit};
use super::magnetization::{extract_mbar, LateTimeMagnetization};
use super::minima::{extract_xi_opt, fit_nu, MinimumClass, SqueezingExtract, DEFAULT_T_EXCLUDE};
use super::topt::{fit_topt_scaling, ToptPoint, ToptScaling, DEFAULT_N_REF};
use super::Series;
use crate::ensemble::{EnsembleResult, PointSpec};
use crate::error::Result;
use crate::io;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    pub t_exclude: f64,
    pub nu_threshold: f64,
    pub alpha_threshold: f64,
    pub n_ref: f64,
    /// Critical vacancy for the t_opt fit; taken from the ν boundary when absent.
    pub p_c: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            t_exclude: DEFAULT_T_EXCLUDE,
            nu_threshold: DEFAULT_THRESHOLD,
            alpha_threshold: DEFAULT_THRESHOLD,
            n_ref: DEFAULT_N_REF,
            p_c: None,
        }
    }
}

/// Results grouped into `(p, Δ)` rows, sizes sorted by mean N.
pub struct Groups<'a> {
    pub rows: Vec<((f64, f64), Vec<(usize, f64, &'a EnsembleResult)>)>,
}

pub fn group(results: &[(PointSpec, EnsembleResult)]) -> Groups<'_> {
    let mut sorted: Vec<&(PointSpec, EnsembleResult)> = results.iter().collect();
    sorted.sort_by(|a, b| {
        a.0.delta
            .total_cmp(&b.0.delta)
            .then(a.0.p.total_cmp(&b.0.p))
            .then(a.1.mean_spins().total_cmp(&b.1.mean_spins()))
    });
    let mut rows: Vec<((f64, f64), Vec<(usize, f64, &EnsembleResult)>)> = Vec::new();
    for (pt, res) in sorted {
        let key = (pt.p, pt.delta);
        match rows.last_mut() {
            Some((k, v)) if *k == key => v.push((pt.size, res.mean_spins(), res)),
            _ => rows.push((key, vec![(pt.size, res.mean_spins(), res)])),
        }
    }
    Groups { rows }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiOptRow {
    pub p: f64,
    pub delta: f64,
    pub extract: SqueezingExtract,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MbarRow {
    pub p: f64,
    pub delta: f64,
    pub size: usize,
    pub n_spins: f64,
    pub m: LateTimeMagnetization,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentRow {
    pub p: f64,
    pub delta: f64,
    /// "nu" or "alpha".
    pub kind: &'static str,
    pub fit: Option<ScalingFit>,
    pub n_sizes: usize,
    pub hatched: bool,
}

impl ExponentRow {
    pub fn value(&self) -> Option<(f64, f64)> {
        self.fit.as_ref().map(|f| (f.decay_exponent(), f.slope_err))
    }
}

pub fn squeezing(
    results: &[(PointSpec, EnsembleResult)],
    s: &AnalysisSettings,
) -> Result<(Vec<XiOptRow>, Vec<ExponentRow>)> {
    let mut xi = Vec::new();
    let mut exps = Vec::new();
    for ((p, delta), sizes) in group(results).rows {
        let input: Vec<(usize, f64, Series)> = sizes.iter().map(|&(l, n, r)| (l, n, Series::xi2(r))).collect();
        let extracts = match extract_xi_opt(&input, s.t_exclude) {
            Ok(e) => e,
            Err(e) => {
                warn!("p={p} Δ={delta}: squeezing analysis skipped: {e}");
                continue;
            }
        };
        let fit = fit_nu(&extracts)?;
        exps.push(ExponentRow {
            p,
            delta,
            kind: "nu",
            fit,
            n_sizes: extracts.len(),
            hatched: false,
        });
        xi.extend(extracts.into_iter().map(|extract| XiOptRow { p, delta, extract }));
    }
    Ok((xi, exps))
}

pub fn magnetization(results: &[(PointSpec, EnsembleResult)]) -> Result<(Vec<MbarRow>, Vec<ExponentRow>)> {
    let mut rows = Vec::new();
    let mut exps = Vec::new();
    for ((p, delta), sizes) in group(results).rows {
        let mut group_rows = Vec::new();
        for &(size, n_spins, res) in &sizes {
            match extract_mbar(&Series::mxy(res)) {
                Ok(m) => group_rows.push(MbarRow {
                    p,
                    delta,
                    size,
                    n_spins,
                    m,
                }),
                Err(e) => warn!("p={p} Δ={delta} L={size}: magnetization skipped: {e}"),
            }
        }
        let usable: Vec<&MbarRow> = group_rows.iter().filter(|r| r.m.mbar > 0.0 && r.m.err > 0.0).collect();
        let xs: Vec<f64> = usable.iter().map(|r| r.n_spins).collect();
        let ys: Vec<f64> = usable.iter().map(|r| r.m.mbar).collect();
        let es: Vec<f64> = usable.iter().map(|r| r.m.err).collect();
        exps.push(ExponentRow {
            p,
            delta,
            kind: "alpha",
            fit: fit_power_law(&xs, &ys, &es)?,
            n_sizes: usable.len(),
            hatched: group_rows.iter().any(|r| !r.m.converged),
        });
        rows.extend(group_rows);
    }
    Ok((rows, exps))
}

pub struct PhaseDiagramOutput {
    pub xi: Vec<XiOptRow>,
    pub mbar: Vec<MbarRow>,
    pub exponents: Vec<ExponentRow>,
    pub diagram: PhaseDiagram,
}

pub fn phase_diagram(results: &[(PointSpec, EnsembleResult)], s: &AnalysisSettings) -> Result<PhaseDiagramOutput> {
    let (xi, nus) = squeezing(results, s)?;
    let (mbar, alphas) = magnetization(results)?;
    let mut points: Vec<PhasePoint> = Vec::new();
    for e in nus.iter().chain(&alphas) {
        let idx = match points.iter().position(|q| q.p == e.p && q.delta == e.delta) {
            Some(i) => i,
            None => {
                points.push(PhasePoint {
                    p: e.p,
                    delta: e.delta,
                    alpha: None,
                    nu: None,
                    hatched: false,
                });
                points.len() - 1
            }
        };
        let pt = &mut points[idx];
        match e.kind {
            "nu" => pt.nu = e.value(),
            _ => {
                pt.alpha = e.value();
                pt.hatched |= e.hatched;
            }
        }
    }
    let diagram = assemble_phase_diagram(&points, s.nu_threshold, s.alpha_threshold)?;
    let mut exponents = nus;
    exponents.extend(alphas);
    Ok(PhaseDiagramOutput {
        xi,
        mbar,
        exponents,
        diagram,
    })
}

/// Per-Δ t_opt scaling from the scalable minima.
pub fn topt(results: &[(PointSpec, EnsembleResult)], s: &AnalysisSettings) -> Result<Vec<(f64, ToptScaling)>> {
    let (xi, _) = squeezing(results, s)?;
    let diagram = if s.p_c.is_none() {
        Some(phase_diagram(results, s)?.diagram)
    } else {
        None
    };
    let mut deltas: Vec<f64> = xi.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let mut out = Vec::new();
    for delta in deltas {
        let p_c = match s.p_c {
            Some(p) => p,
            None => {
                let crossing = diagram.as_ref().and_then(|d| {
                    d.boundaries
                        .iter()
                        .find(|b| b.delta == delta && b.diagnostic == "nu" && b.estimate.kind == BoundaryKind::Crossing)
                });
                match crossing {
                    Some(b) => b.estimate.p_c,
                    None => {
                        warn!("Δ={delta}: no ν crossing, t_opt scaling skipped");
                        continue;
                    }
                }
            }
        };
        let points: Vec<ToptPoint> = xi
            .iter()
            .filter(|r| r.delta == delta && r.extract.class == MinimumClass::ScalableCandidate && r.p < p_c)
            .map(|r| ToptPoint {
                p: r.p,
                n_spins: r.extract.n_spins,
                t_opt: r.extract.t_opt,
                err: r.extract.t_opt_err,
            })
            .collect();
        out.push((delta, fit_topt_scaling(&points, p_c, s.n_ref)?));
    }
    Ok(out)
}

fn write_table(path: &Path, tag: &str, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = io::provenance(tag, hash);
    buf.push('\n');
    buf.push_str(&header.join(","));
    buf.push('\n');
    for r in rows {
        buf.push_str(&r.join(","));
        buf.push('\n');
    }
    io::write_atomic(path, buf.as_bytes())
}

fn opt(v: Option<f64>) -> String {
    io::num(v.unwrap_or(f64::NAN))
}

pub fn write_xi_opt(path: &Path, rows: &[XiOptRow], hash: &str) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let e = &r.extract;
            vec![
                io::num(r.p),
                io::num(r.delta),
                e.size.to_string(),
                io::num(e.n_spins),
                io::num(e.xi2_opt),
                io::num(e.xi2_err),
                io::num(e.t_opt),
                io::num(e.t_opt_err),
                e.class.tag().to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        "xi_opt",
        hash,
        &["p", "delta", "L", "N", "xi2_opt", "err", "t_opt", "t_opt_err", "class"],
        &body,
    )
}

pub fn write_mbar(path: &Path, rows: &[MbarRow], hash: &str) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                io::num(r.p),
                io::num(r.delta),
                r.size.to_string(),
                io::num(r.n_spins),
                io::num(r.m.mbar),
                io::num(r.m.err),
                io::num(r.m.m1),
                io::num(r.m.m2),
                io::num(r.m.sigma),
                io::num(r.m.projected_change),
                r.m.converged.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        "mbar",
        hash,
        &[
            "p",
            "delta",
            "L",
            "N",
            "mbar",
            "err",
            "m1",
            "m2",
            "sigma",
            "projected_change",
            "converged",
        ],
        &body,
    )
}

pub fn write_exponents(path: &Path, rows: &[ExponentRow], hash: &str) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let f = r.fit.as_ref();
            vec![
                io::num(r.p),
                io::num(r.delta),
                r.kind.to_string(),
                opt(f.map(|f| f.decay_exponent())),
                opt(f.map(|f| f.slope_err)),
                opt(f.map(|f| f.intercept)),
                opt(f.map(|f| f.intercept_err)),
                r.n_sizes.to_string(),
                opt(f.map(|f| f.chi2)),
                if f.is_some() { "fit" } else { "no-fit" }.to_string(),
                r.hatched.to_string(),
            ]
        })
        .collect();
    write_table(
        path,
        "exponents",
        hash,
        &[
            "p",
            "delta",
            "exponent",
            "value",
            "err",
            "intercept",
            "intercept_err",
            "n_sizes",
            "chi2",
            "status",
            "hatched",
        ],
        &body,
    )
}

pub fn write_phase_diagram(dir: &Path, d: &PhaseDiagram, hash: &str) -> Result<()> {
    let grid: Vec<Vec<String>> = d
        .grid
        .iter()
        .map(|g| {
            vec![
                io::num(g.p),
                io::num(g.delta),
                opt(g.alpha.map(|a| a.0)),
                opt(g.alpha.map(|a| a.1)),
                opt(g.nu.map(|a| a.0)),
                opt(g.nu.map(|a| a.1)),
                g.hatched.to_string(),
            ]
        })
        .collect();
    write_table(
        &dir.join("phase_diagram.csv"),
        "phase_diagram",
        hash,
        &["p", "delta", "alpha", "alpha_err", "nu", "nu_err", "hatched"],
        &grid,
    )?;
    let bounds: Vec<Vec<String>> = d
        .boundaries
        .iter()
        .map(|b| {
            let kind = match b.estimate.kind {
                BoundaryKind::Crossing => "crossing",
                BoundaryKind::LowerBound => "lower-bound",
                BoundaryKind::UpperBound => "upper-bound",
            };
            vec![
                io::num(b.delta),
                b.diagnostic.clone(),
                io::num(b.threshold),
                kind.to_string(),
                io::num(b.estimate.p_c),
                io::num(b.estimate.dp_c),
            ]
        })
        .collect();
    write_table(
        &dir.join("boundary.csv"),
        "boundary",
        hash,
        &["delta", "diagnostic", "threshold", "kind", "p_c", "dp_c"],
        &bounds,
    )
}

pub fn write_topt(path: &Path, fits: &[(f64, ToptScaling)], hash: &str) -> Result<()> {
    let mut body = Vec::new();
    for (delta, s) in fits {
        for m in &s.mu {
            let f = m.fit.as_ref();
            body.push(vec![
                io::num(*delta),
                "mu".into(),
                io::num(m.p),
                io::num(s.n_ref),
                opt(f.map(|f| f.slope)),
                opt(f.map(|f| f.slope_err)),
                opt(m.t_ref.map(|t| t.0)),
                opt(m.t_ref.map(|t| t.1)),
                if f.is_some() { "fit" } else { "no-fit" }.into(),
            ]);
        }
        let gammas = std::iter::once((s.n_ref, &s.gamma)).chain(s.sensitivity.iter().map(|(n, g)| (*n, g)));
        for (n_ref, g) in gammas {
            body.push(vec![
                io::num(*delta),
                "gamma".into(),
                io::num(s.p_c),
                io::num(n_ref),
                opt(g.as_ref().map(|f| f.decay_exponent())),
                opt(g.as_ref().map(|f| f.slope_err)),
                io::num(f64::NAN),
                io::num(f64::NAN),
                if g.is_some() { "fit" } else { "no-fit" }.into(),
            ]);
        }
    }
    write_table(
        path,
        "topt",
        hash,
        &[
            "delta",
            "quantity",
            "p",
            "n_ref",
            "value",
            "err",
            "t_ref",
            "t_ref_err",
            "status",
        ],
        &body,
    )
}
