//! Disorder averaging and reproducible sweeps over `(p, Δ, L)` grids.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctwa::{pair_spins, run_ctwa_ensemble};
use crate::dtwa::{flags, run_ensemble, squeezing_from_moments, EnsembleOptions, Method, ObservableSeries, SeriesRow};
use crate::dynamics::ConservationMonitor;
use crate::error::{Error, Result};
use crate::exact::evolve_exact;
use crate::io;
use crate::lattice::{build_couplings, build_lattice_with, Boundary, LatticeRealization, ModelParams};
use crate::ode::{geometric_grid, IntegratorConfig};
use crate::seed;

/// Observables combined across disorder, in CSV order.
pub const OBSERVABLES: [&str; 8] = ["Sx", "Sy", "Sz", "Vyy", "Vzz", "Vyz", "xi2", "mxy"];

pub mod obs {
    pub const SX: usize = 0;
    pub const XI2: usize = 6;
    pub const MXY: usize = 7;
}

fn value_and_error(r: &SeriesRow, o: usize) -> (f64, f64) {
    match o {
        0 => (r.sx, r.sx_err),
        1 => (r.sy, r.sy_err),
        2 => (r.sz, r.sz_err),
        3 => (r.vyy, r.vyy_err),
        4 => (r.vzz, r.vzz_err),
        5 => (r.vyz, r.vyz_err),
        6 => (r.xi2, r.xi2_err),
        _ => (r.mxy, r.mxy_err),
    }
}

/// Disorder-combined statistics of one observable at one time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Combined {
    pub mean: f64,
    /// `sqrt(σ_dis² + mean(σ²)/𝒩)`.
    pub sem: f64,
    /// Disorder scatter `σ_dis`; NaN for a single realization.
    pub dis: f64,
    /// Mean of the per-realization squared errors.
    pub err2: f64,
}

/// SM error combination for one observable: values and errors per realization.
pub fn combine_values(values: &[f64], errors: &[f64]) -> Combined {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let err2 = errors.iter().map(|e| e * e).sum::<f64>() / n;
    if values.len() < 2 {
        return Combined {
            mean,
            sem: (err2 / n).sqrt(),
            dis: f64::NAN,
            err2,
        };
    }
    let dis2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * (n - 1.0));
    Combined {
        mean,
        sem: (dis2 + err2 / n).sqrt(),
        dis: dis2.sqrt(),
        err2,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRow {
    pub t: f64,
    pub values: [Combined; 8],
    pub flags: u32,
}

/// Disorder-averaged series of one `(p, Δ, L)` point.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub rows: Vec<EnsembleRow>,
    /// Spin count of every realization.
    pub n_spins: Vec<usize>,
}

impl EnsembleResult {
    pub fn n_realizations(&self) -> usize {
        self.n_spins.len()
    }

    pub fn mean_spins(&self) -> f64 {
        self.n_spins.iter().sum::<usize>() as f64 / self.n_spins.len() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// `(mean, sem)` of observable `o` over time.
    pub fn column(&self, o: usize) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().map(|r| (r.values[o].mean, r.values[o].sem)).unzip()
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut buf = io::provenance("ensemble", config_hash);
        let spins: Vec<String> = self.n_spins.iter().map(|n| n.to_string()).collect();
        buf.push_str(&format!("\n# n_spins={}\nt", spins.join(" ")));
        for o in OBSERVABLES {
            buf.push_str(&format!(",{o},{o}_sem,{o}_dis,{o}_err2"));
        }
        buf.push_str(",flags\n");
        for r in &self.rows {
            buf.push_str(&io::num(r.t));
            for c in &r.values {
                for v in [c.mean, c.sem, c.dis, c.err2] {
                    buf.push(',');
                    buf.push_str(&io::num(v));
                }
            }
            buf.push_str(&format!(",{}\n", r.flags));
        }
        io::write_atomic(path, buf.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let n_spins = text
            .lines()
            .find_map(|l| l.strip_prefix("# n_spins="))
            .ok_or_else(|| Error::Analysis(format!("{}: missing n_spins header", path.display())))?
            .split_whitespace()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| Error::Analysis(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rdr = io::csv_reader(path)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Analysis(format!("{}: short row", path.display())))?
                    .parse::<f64>()
                    .map_err(|e| Error::Analysis(format!("{}: {e}", path.display())))
            };
            let mut values = [Combined::default(); 8];
            for (o, c) in values.iter_mut().enumerate() {
                let k = 1 + 4 * o;
                *c = Combined {
                    mean: field(k)?,
                    sem: field(k + 1)?,
                    dis: field(k + 2)?,
                    err2: field(k + 3)?,
                };
            }
            let flags = rec
                .get(33)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Analysis(format!("{}: bad flags column", path.display())))?;
            rows.push(EnsembleRow {
                t: field(0)?,
                values,
                flags,
            });
        }
        Ok(EnsembleResult { rows, n_spins })
    }
}

/// Combine per-realization series that share one time grid.
pub fn combine_disorder(series: &[ObservableSeries]) -> Result<EnsembleResult> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParameter("no realizations to combine".into()))?;
    for s in series {
        if s.rows.len() != first.rows.len() || s.rows.iter().zip(&first.rows).any(|(a, b)| a.t != b.t) {
            return Err(Error::MismatchedGrids);
        }
    }
    let mut vals = vec![0.0; series.len()];
    let mut errs = vec![0.0; series.len()];
    let rows = (0..first.rows.len())
        .map(|k| {
            let mut values = [Combined::default(); 8];
            for (o, c) in values.iter_mut().enumerate() {
                for (s, series) in series.iter().enumerate() {
                    (vals[s], errs[s]) = value_and_error(&series.rows[k], o);
                }
                *c = combine_values(&vals, &errs);
            }
            let sx = values[obs::SX];
            let mut f = 0;
            if sx.mean * sx.mean < 10.0 * sx.sem * sx.sem {
                f |= flags::XI2_UNRELIABLE;
            }
            if series.len() == 1 {
                f |= flags::SINGLE_REALIZATION;
            }
            EnsembleRow {
                t: first.rows[k].t,
                values,
                flags: f,
            }
        })
        .collect();
    Ok(EnsembleResult {
        rows,
        n_spins: series.iter().map(|s| s.n_spins).collect(),
    })
}

/// How the simulated horizon of a point is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmaxPolicy {
    /// Horizon without pilot information, in units of 1/J.
    pub default: f64,
    /// Largest-L t_opt from a pilot run.
    pub pilot_t_opt: Option<f64>,
    /// Explicit horizon that replaces the policy.
    pub override_t_max: Option<f64>,
}

impl Default for TmaxPolicy {
    fn default() -> Self {
        TmaxPolicy {
            default: 500.0,
            pilot_t_opt: None,
            override_t_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmaxDecision {
    pub t_max: f64,
    pub warning: Option<String>,
}

/// Horizon at least ten times the pilot t_opt; default otherwise.
pub fn plan_tmax(policy: &TmaxPolicy) -> TmaxDecision {
    let planned = policy.pilot_t_opt.map_or(policy.default, |t| 10.0 * t);
    match policy.override_t_max {
        Some(t) => {
            let warning = policy
                .pilot_t_opt
                .filter(|&pilot| t < 10.0 * pilot)
                .map(|pilot| format!("t_max override {t} is below 10 x pilot t_opt ({pilot})"));
            if let Some(w) = &warning {
                warn!("{w}");
            }
            TmaxDecision { t_max: t, warning }
        }
        None => TmaxDecision {
            t_max: planned,
            warning: None,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub p: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub size: usize,
}

impl PointSpec {
    pub fn dir_name(&self) -> String {
        format!("point_{}_{}_{}", self.p, self.delta, self.size)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub points: Vec<PointSpec>,
    /// Model template; `delta` is replaced per point.
    pub model: ModelParams,
    pub boundary: Boundary,
    pub method: Method,
    pub n_realizations: usize,
    pub n_traj: usize,
    pub tmax: TmaxPolicy,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_min: f64,
    pub samples_per_decade: usize,
    pub batch_width: usize,
    pub exact_cap: usize,
    pub master_seed: u64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidParameter("sweep has no points".into()));
        }
        if self.n_realizations < 1 {
            return Err(Error::InvalidParameter("need at least one disorder realization".into()));
        }
        if self.method != Method::Exact && self.n_traj < 2 {
            return Err(Error::InvalidParameter("need at least 2 trajectories".into()));
        }
        for pt in &self.points {
            if !(0.0..1.0).contains(&pt.p) {
                return Err(Error::InvalidParameter(format!(
                    "vacancy probability must lie in [0, 1), got {}",
                    pt.p
                )));
            }
            if pt.size == 0 {
                return Err(Error::InvalidParameter("lattice side must be at least 1".into()));
            }
            ModelParams {
                delta: pt.delta,
                ..self.model
            }
            .validate()?;
        }
        self.integrator(1.0).validate()
    }

    pub fn params(&self, pt: &PointSpec) -> ModelParams {
        ModelParams {
            delta: pt.delta,
            ..self.model
        }
    }

    pub fn integrator(&self, t_max: f64) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..IntegratorConfig::new(geometric_grid(self.t_min, t_max, self.samples_per_decade))
        }
    }

    /// Seed of realization `k` at point `index`.
    pub fn realization_seed(&self, index: usize, k: usize) -> u64 {
        seed::derive(self.master_seed, &[index as u64, k as u64])
    }

    /// Content hash of everything that determines the outputs of a point.
    pub fn point_hash(&self, index: usize) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            version: &'a str,
            index: usize,
            point: &'a PointSpec,
            plan: &'a SweepPlan,
        }
        let shared = SweepPlan {
            points: Vec::new(),
            ..self.clone()
        };
        io::config_hash(&Key {
            version: io::VERSION,
            index,
            point: &self.points[index],
            plan: &shared,
        })
    }
}

/// One simulated disorder realization.
#[derive(Clone, Debug)]
pub struct RealizationRun {
    pub lattice: LatticeRealization,
    pub series: ObservableSeries,
    pub monitor: ConservationMonitor,
    pub failed_trajectories: usize,
    pub steps: usize,
}

pub fn simulate_realization(plan: &SweepPlan, index: usize, k: usize, t_max: f64) -> Result<RealizationRun> {
    let pt = plan.points[index];
    let params = plan.params(&pt);
    let seed_value = plan.realization_seed(index, k);
    let lattice = build_lattice_with(pt.size, pt.p, seed_value, plan.boundary)?;
    let ct = build_couplings(&lattice, &params)?;
    let icfg = plan.integrator(t_max);
    let opts = EnsembleOptions {
        batch_width: plan.batch_width,
    };
    let n = lattice.n_spins();
    let (series, monitor, failed, steps) = match plan.method {
        Method::Dtwa => {
            let run = run_ensemble(&ct, &params, &icfg, plan.n_traj, seed_value, &opts)?;
            (
                squeezing_from_moments(&run.acc, n, Method::Dtwa),
                run.monitor,
                run.failed,
                run.stats.accepted,
            )
        }
        Method::Ctwa => {
            let partition = pair_spins(&ct);
            let run = run_ctwa_ensemble(&ct, &partition, &params, &icfg, plan.n_traj, seed_value, &opts)?;
            (
                squeezing_from_moments(&run.acc, n, Method::Ctwa),
                run.monitor,
                run.failed,
                run.stats.accepted,
            )
        }
        Method::Exact => (
            evolve_exact(&ct, &params, &icfg.sample_times, plan.exact_cap)?,
            ConservationMonitor::default(),
            0,
            0,
        ),
    };
    Ok(RealizationRun {
        lattice,
        series,
        monitor,
        failed_trajectories: failed,
        steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub seed: u64,
    pub n_spins: usize,
    pub lattice_attempts: u32,
    pub file: String,
    pub sha256: String,
    pub conservation: ConservationMonitor,
    pub failed_trajectories: usize,
    pub accepted_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointManifest {
    pub version: String,
    pub spec_hash: String,
    pub point: PointSpec,
    pub point_index: usize,
    pub method: Method,
    pub n_traj: usize,
    pub t_max: f64,
    pub t_max_warning: Option<String>,
    pub two_site_init: Option<String>,
    pub realizations: Vec<RealizationRecord>,
    pub failures: Vec<(usize, String)>,
    pub ensemble_file: Option<String>,
    pub ensemble_sha256: Option<String>,
    pub status: PointStatus,
}

impl PointManifest {
    fn load(dir: &Path) -> Option<Self> {
        let text = fs::read_to_string(dir.join("manifest.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    fn record_is_intact(&self, dir: &Path, k: usize) -> Option<&RealizationRecord> {
        let rec = self.realizations.iter().find(|r| r.index == k)?;
        let sha = io::sha256_file(&dir.join(&rec.file)).ok()?;
        (sha == rec.sha256).then_some(rec)
    }

    fn is_intact(&self, dir: &Path, spec_hash: &str, n_realizations: usize) -> bool {
        self.spec_hash == spec_hash
            && self.status == PointStatus::Complete
            && (0..n_realizations).all(|k| self.record_is_intact(dir, k).is_some())
            && match (&self.ensemble_file, &self.ensemble_sha256) {
                (Some(f), Some(h)) => io::sha256_file(&dir.join(f)).ok().as_deref() == Some(h.as_str()),
                _ => false,
            }
    }
}

#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub point: PointSpec,
    pub dir: PathBuf,
    pub status: PointStatus,
    /// Realizations simulated in this invocation.
    pub computed: usize,
    pub result: Option<EnsembleResult>,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub points: Vec<PointOutcome>,
}

impl SweepOutcome {
    pub fn complete(&self) -> bool {
        self.points.iter().all(|p| p.status == PointStatus::Complete)
    }

    pub fn computed(&self) -> usize {
        self.points.iter().map(|p| p.computed).sum()
    }
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    version: &'a str,
    config_hash: &'a str,
    master_seed: u64,
    points: Vec<SweepEntry>,
}

#[derive(Serialize)]
struct SweepEntry {
    point: PointSpec,
    dir: String,
    spec_hash: String,
    status: PointStatus,
    computed: usize,
}

fn run_point(plan: &SweepPlan, index: usize, out_dir: &Path, config_hash: &str) -> Result<PointOutcome> {
    let pt = plan.points[index];
    let dir = out_dir.join(pt.dir_name());
    let spec_hash = plan.point_hash(index);
    let previous = PointManifest::load(&dir);
    if let Some(m) = &previous {
        if m.is_intact(&dir, &spec_hash, plan.n_realizations) {
            info!("{}: up to date", pt.dir_name());
            let result = EnsembleResult::read_csv(&dir.join(m.ensemble_file.as_deref().unwrap_or("ensemble.csv")))?;
            return Ok(PointOutcome {
                point: pt,
                dir,
                status: PointStatus::Complete,
                computed: 0,
                result: Some(result),
            });
        }
    }
    let reusable = previous.filter(|m| m.spec_hash == spec_hash);
    let tmax = plan_tmax(&plan.tmax);

    let outcomes: Vec<(usize, Result<(ObservableSeries, RealizationRecord, bool)>)> = (0..plan.n_realizations)
        .into_par_iter()
        .map(|k| {
            if let Some(rec) = reusable.as_ref().and_then(|m| m.record_is_intact(&dir, k)) {
                let loaded = ObservableSeries::read_csv(&dir.join(&rec.file), plan.method, rec.n_spins)
                    .map(|s| (s, rec.clone(), false));
                if loaded.is_ok() {
                    return (k, loaded);
                }
            }
            let start = Instant::now();
            let res = simulate_realization(plan, index, k, tmax.t_max).and_then(|run| {
                let file = format!("realization_{k}.csv");
                let path = dir.join(&file);
                run.series.write_csv(&path, config_hash)?;
                let rec = RealizationRecord {
                    index: k,
                    seed: plan.realization_seed(index, k),
                    n_spins: run.lattice.n_spins(),
                    lattice_attempts: run.lattice.attempts,
                    sha256: io::sha256_file(&path)?,
                    file,
                    conservation: run.monitor,
                    failed_trajectories: run.failed_trajectories,
                    accepted_steps: run.steps,
                };
                info!(
                    "{} realization {k}: N={}, {:.2} s",
                    pt.dir_name(),
                    rec.n_spins,
                    start.elapsed().as_secs_f64()
                );
                Ok((run.series, rec, true))
            });
            (k, res)
        })
        .collect();

    let mut series = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut computed = 0;
    for (k, res) in outcomes {
        match res {
            Ok((s, rec, fresh)) => {
                computed += usize::from(fresh);
                series.push(s);
                records.push(rec);
            }
            Err(e) => {
                warn!("{} realization {k} failed: {e}", pt.dir_name());
                failures.push((k, e.to_string()));
            }
        }
    }
    let status = if failures.is_empty() {
        PointStatus::Complete
    } else {
        PointStatus::Incomplete
    };
    let (result, ensemble_file, ensemble_sha256) = if series.is_empty() {
        (None, None, None)
    } else {
        let combined = combine_disorder(&series)?;
        let path = dir.join("ensemble.csv");
        combined.write_csv(&path, config_hash)?;
        (
            Some(combined),
            Some("ensemble.csv".to_string()),
            Some(io::sha256_file(&path)?),
        )
    };
    let manifest = PointManifest {
        version: io::VERSION.to_string(),
        spec_hash,
        point: pt,
        point_index: index,
        method: plan.method,
        n_traj: plan.n_traj,
        t_max: tmax.t_max,
        t_max_warning: tmax.warning,
        two_site_init: (plan.method == Method::Ctwa).then(|| "factorized product of one-site draws".to_string()),
        realizations: records,
        failures,
        ensemble_file,
        ensemble_sha256,
        status,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    io::write_atomic(&dir.join("manifest.json"), &json)?;
    Ok(PointOutcome {
        point: pt,
        dir,
        status,
        computed,
        result,
    })
}

/// Execute every point of the plan under `out_dir`, skipping points whose
/// outputs are already present and intact.
pub fn run_sweep(plan: &SweepPlan, out_dir: &Path, config_hash: &str) -> Result<SweepOutcome> {
    plan.validate()?;
    let start = Instant::now();
    let mut points = Vec::with_capacity(plan.points.len());
    for index in 0..plan.points.len() {
        points.push(run_point(plan, index, out_dir, config_hash)?);
    }
    let manifest = SweepManifest {
        version: io::VERSION,
        config_hash,
        master_seed: plan.master_seed,
        points: points
            .iter()
            .enumerate()
            .map(|(i, p)| SweepEntry {
                point: p.point,
                dir: p.point.dir_name(),
                spec_hash: plan.point_hash(i),
                status: p.status,
                computed: p.computed,
            })
            .collect(),
    };
    info!("sweep finished in {:.2} s", start.elapsed().as_secs_f64());
    io::write_atomic(&out_dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(SweepOutcome { points })
}

/// Load the disorder-averaged result of every point present under `out_dir`.
pub fn load_results(out_dir: &Path) -> Result<Vec<(PointSpec, EnsembleResult)>> {
    let entries = fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Vec::new();
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("point_")))
        .collect();
    dirs.sort();
    for dir in dirs {
        let Some(m) = PointManifest::load(&dir) else {
            warn!("{}: no readable manifest, skipped", dir.display());
            continue;
        };
        let Some(file) = &m.ensemble_file else {
            warn!("{}: no ensemble result, skipped", dir.display());
            continue;
        };
        if m.status != PointStatus::Complete {
            warn!("{}: incomplete point, using available realizations", dir.display());
        }
        out.push((m.point, EnsembleResult::read_csv(&dir.join(file))?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_combination() {
        let c = combine_values(&[1.0, 1.2, 0.8, 1.0], &[0.1; 4]);
        assert!((c.mean - 1.0).abs() < 1e-15);
        assert!((c.dis * c.dis - 1.0 / 150.0).abs() < 1e-15);
        assert!((c.sem - (1.0f64 / 150.0 + 0.01 / 4.0).sqrt()).abs() < 1e-15);
        assert!((c.sem - 0.0957).abs() < 1e-4);
    }

    #[test]
    fn identical_realizations() {
        let c = combine_values(&[0.7; 5], &[0.0; 5]);
        assert_eq!(c.sem, 0.0);
        let c = combine_values(&[0.7, 0.7], &[0.2, 0.2]);
        assert!((c.sem - 0.2 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_realization_passes_through() {
        let c = combine_values(&[0.3], &[0.05]);
        assert!(c.dis.is_nan());
        assert_eq!(c.mean, 0.3);
        assert_eq!(c.sem, 0.05);
    }

    #[test]
    fn tmax_policy() {
        let pilot = TmaxPolicy {
            pilot_t_opt: Some(20.0),
            ..Default::default()
        };
        assert!(plan_tmax(&pilot).t_max >= 200.0);
        assert_eq!(plan_tmax(&TmaxPolicy::default()).t_max, 500.0);
        let short = TmaxPolicy {
            override_t_max: Some(50.0),
            ..pilot
        };
        let d = plan_tmax(&short);
        assert_eq!(d.t_max, 50.0);
        assert!(d.warning.is_some());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let row = |t| SeriesRow {
            t,
            ..Default::default()
        };
        let a = ObservableSeries {
            method: Method::Dtwa,
            n_spins: 4,
            rows: vec![row(0.0), row(1.0)],
        };
        let b = ObservableSeries {
            rows: vec![row(0.0), row(2.0)],
            ..a.clone()
        };
        assert!(matches!(combine_disorder(&[a, b]), Err(Error::MismatchedGrids)));
    }
}
