//! Discrete truncated Wigner sampling and collective-spin statistics.
//!
//! Each trajectory starts from a discrete phase point of the x-polarized
//! product state (`s^x = 1/2`, `s^y, s^z = ±1/2`), is evolved classically,
//! and contributes collective first and second moments. Equal-time classical
//! products estimate symmetrically ordered quantum moments.

use std::path::Path;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, ConservationMonitor, SpinConfiguration, SpinFlow, SpinMonitor, Vec3};
use crate::error::{Error, Result};
use crate::io;
use crate::kernel::CouplingKernel;
use crate::lattice::ModelParams;
use crate::ode::{self, IntegratorConfig, StepStats};
use crate::seed;

/// Index order of the six symmetric second moments.
pub const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dtwa,
    Ctwa,
    Exact,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Dtwa => "dtwa",
            Method::Ctwa => "ctwa",
            Method::Exact => "exact",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Sums {
    n: f64,
    s: [f64; 3],
    ss: [f64; 6],
    q: [f64; 6],
    qq: [f64; 6],
    /// Cross products of the transverse `q` components, see [`TRANSVERSE`].
    qx: [f64; 3],
}

/// Indices of `(yy, zz, yz)` in [`PAIRS`].
const TRANSVERSE: [usize; 3] = [1, 2, 5];

/// Mergeable per-time sums of collective moments.
///
/// `s` is the per-trajectory collective spin; `q` is the per-trajectory
/// estimate of the symmetrized second moments (`q = s s^T` for dTWA).
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    times: Vec<f64>,
    sums: Vec<Sums>,
}

/// Moment estimates at one sample time.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub mean: Vec3,
    pub mean_err: Vec3,
    /// Second moments `⟨{S^a, S^b}⟩/2` in [`PAIRS`] order.
    pub second: [f64; 6],
    pub second_err: [f64; 6],
    /// Covariances `⟨{S^a, S^b}⟩/2 - ⟨S^a⟩⟨S^b⟩` in [`PAIRS`] order.
    pub cov: [f64; 6],
    /// Covariance matrix of the estimated `(yy, zz, yz)` second moments,
    /// with index pairs in [`PAIRS`] order.
    pub transverse_cov: [f64; 6],
}

impl MomentAccumulator {
    pub fn new(times: Vec<f64>) -> Self {
        let sums = vec![Sums::default(); times.len()];
        MomentAccumulator { times, sums }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_samples(&self) -> usize {
        self.sums.first().map_or(0, |s| s.n as usize)
    }

    pub fn add(&mut self, k: usize, s: Vec3, q: [f64; 6]) {
        let acc = &mut self.sums[k];
        acc.n += 1.0;
        for a in 0..3 {
            acc.s[a] += s[a];
        }
        for (m, &(a, b)) in PAIRS.iter().enumerate() {
            acc.ss[m] += s[a] * s[b];
            acc.q[m] += q[m];
            acc.qq[m] += q[m] * q[m];
        }
        let [yy, zz, yz] = TRANSVERSE.map(|m| q[m]);
        acc.qx[0] += yy * zz;
        acc.qx[1] += yy * yz;
        acc.qx[2] += zz * yz;
    }

    /// Classical dTWA sample: `q = s s^T`.
    pub fn add_classical(&mut self, k: usize, s: Vec3) {
        let q = PAIRS.map(|(a, b)| s[a] * s[b]);
        self.add(k, s, q);
    }

    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if self.times != other.times {
            return Err(Error::MismatchedGrids);
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.n += b.n;
            for m in 0..3 {
                a.s[m] += b.s[m];
            }
            for m in 0..6 {
                a.ss[m] += b.ss[m];
                a.q[m] += b.q[m];
                a.qq[m] += b.qq[m];
            }
            for m in 0..3 {
                a.qx[m] += b.qx[m];
            }
        }
        Ok(())
    }

    /// Unbiased (n - 1) moment estimates at sample `k`.
    pub fn moments(&self, k: usize) -> Moments {
        let acc = &self.sums[k];
        let n = acc.n;
        let mean = acc.s.map(|v| v / n);
        let mut out = Moments {
            mean,
            ..Default::default()
        };
        for (m, &(a, b)) in PAIRS.iter().enumerate() {
            let classical_cov = (acc.ss[m] - n * mean[a] * mean[b]) / (n - 1.0);
            let q_mean = acc.q[m] / n;
            let q_var = ((acc.qq[m] - n * q_mean * q_mean) / (n - 1.0)).max(0.0);
            out.second[m] = q_mean;
            out.second_err[m] = (q_var / n).sqrt();
            // ⟨q⟩ - E[m_a m_b], with E[m_a m_b] = μ_a μ_b + Cov(S_a, S_b)/n.
            out.cov[m] = q_mean - mean[a] * mean[b] + classical_cov / n;
            if a == b {
                out.mean_err[a] = (classical_cov.max(0.0) / n).sqrt();
            }
        }
        let qm = TRANSVERSE.map(|m| acc.q[m] / n);
        for (slot, &(i, j)) in PAIRS.iter().enumerate() {
            let cross = if i == j {
                acc.qq[TRANSVERSE[i]]
            } else {
                acc.qx[i + j - 1]
            };
            out.transverse_cov[slot] = (cross - n * qm[i] * qm[j]) / ((n - 1.0) * n);
        }
        out
    }
}

/// Smaller eigenvalue of `[[vyy, vyz], [vyz, vzz]]`: the minimal variance of
/// `n · S` over directions `n ⊥ x`.
pub fn lambda_min(vyy: f64, vzz: f64, vyz: f64) -> f64 {
    let mean = 0.5 * (vyy + vzz);
    let half = 0.5 * (vyy - vzz);
    mean - half.hypot(vyz)
}

/// Standard error of `lambda_min`: the error of the variance along the
/// minimizing direction `n`, with `cov` the covariance of the `(yy, zz, yz)`
/// estimates. First-order exact because `lambda_min` is stationary in `n`.
fn lambda_min_err(vyy: f64, vzz: f64, vyz: f64, cov: &[f64; 6]) -> f64 {
    let lam = lambda_min(vyy, vzz, vyz);
    let (u, v) = ((vyz, lam - vyy), (lam - vzz, vyz));
    let (ny, nz) = if u.0.hypot(u.1) >= v.0.hypot(v.1) { u } else { v };
    let norm = ny.hypot(nz);
    let (ny, nz) = if norm > 0.0 { (ny / norm, nz / norm) } else { (1.0, 0.0) };
    let c = [ny * ny, nz * nz, 2.0 * ny * nz];
    let var: f64 = PAIRS
        .iter()
        .zip(cov)
        .map(|(&(i, j), &s)| if i == j { c[i] * c[i] * s } else { 2.0 * c[i] * c[j] * s })
        .sum();
    var.max(0.0).sqrt()
}

pub mod flags {
    /// `⟨S^x⟩²` is below ten times its squared standard error.
    pub const XI2_UNRELIABLE: u32 = 1;
    /// Only one disorder realization; the disorder scatter is undefined.
    pub const SINGLE_REALIZATION: u32 = 2;
}

/// One row of an observable time series. Column order is the CSV schema.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    #[serde(rename = "Sx")]
    pub sx: f64,
    #[serde(rename = "Sy")]
    pub sy: f64,
    #[serde(rename = "Sz")]
    pub sz: f64,
    #[serde(rename = "Vyy")]
    pub vyy: f64,
    #[serde(rename = "Vzz")]
    pub vzz: f64,
    #[serde(rename = "Vyz")]
    pub vyz: f64,
    pub xi2: f64,
    pub xi2_err: f64,
    pub mxy: f64,
    pub mxy_err: f64,
    pub flags: u32,
    #[serde(rename = "Sx_err")]
    pub sx_err: f64,
    #[serde(rename = "Sy_err")]
    pub sy_err: f64,
    #[serde(rename = "Sz_err")]
    pub sz_err: f64,
    #[serde(rename = "Vyy_err")]
    pub vyy_err: f64,
    #[serde(rename = "Vzz_err")]
    pub vzz_err: f64,
    #[serde(rename = "Vyz_err")]
    pub vyz_err: f64,
}

impl SeriesRow {
    pub fn reliable(&self) -> bool {
        self.flags & flags::XI2_UNRELIABLE == 0
    }
}

/// Time series of collective observables for one system.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub method: Method,
    pub n_spins: usize,
    pub rows: Vec<SeriesRow>,
}

impl ObservableSeries {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn write_csv(&self, path: &Path, config_hash: &str) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(io::provenance(self.method.tag(), config_hash).as_bytes());
        buf.push(b'\n');
        buf.extend_from_slice(
            b"t,Sx,Sy,Sz,Vyy,Vzz,Vyz,xi2,xi2_err,mxy,mxy_err,flags,Sx_err,Sy_err,Sz_err,Vyy_err,Vzz_err,Vyz_err\n",
        );
        for r in &self.rows {
            let vals = [
                r.t, r.sx, r.sy, r.sz, r.vyy, r.vzz, r.vyz, r.xi2, r.xi2_err, r.mxy, r.mxy_err,
            ];
            let mut line: Vec<String> = vals.iter().map(|&v| io::num(v)).collect();
            line.push(r.flags.to_string());
            for v in [r.sx_err, r.sy_err, r.sz_err, r.vyy_err, r.vzz_err, r.vyz_err] {
                line.push(io::num(v));
            }
            buf.extend_from_slice(line.join(",").as_bytes());
            buf.push(b'\n');
        }
        io::write_atomic(path, &buf)
    }

    pub fn read_csv(path: &Path, method: Method, n_spins: usize) -> Result<Self> {
        let mut rdr = io::csv_reader(path)?;
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<SeriesRow>, _>>()?;
        Ok(ObservableSeries { method, n_spins, rows })
    }
}

/// Build the observable row from moment estimates of an `n`-spin system.
pub fn observables_row(t: f64, m: &Moments, n: usize) -> SeriesRow {
    let nf = n as f64;
    let (vyy, vzz, vyz) = (m.cov[1], m.cov[2], m.cov[5]);
    let lam = lambda_min(vyy, vzz, vyz);
    let lam_err = lambda_min_err(vyy, vzz, vyz, &m.transverse_cov);
    let sx = m.mean[0];
    let denom = sx * sx;
    let denom_err = 2.0 * sx.abs() * m.mean_err[0];
    let xi2 = nf * lam / denom;
    let xi2_err = if lam != 0.0 && denom != 0.0 {
        xi2.abs() * ((lam_err / lam).powi(2) + (denom_err / denom).powi(2)).sqrt()
    } else {
        nf * lam_err / denom
    };
    let m2 = m.second[0] + m.second[1];
    let mxy = 2.0 / nf * m2.max(0.0).sqrt();
    let m2_err = m.second_err[0].hypot(m.second_err[1]);
    let mxy_err = if m2 > 0.0 {
        2.0 / nf * m2_err / (2.0 * m2.sqrt())
    } else {
        0.0
    };
    let mut f = 0;
    if denom < 10.0 * m.mean_err[0].powi(2) {
        f |= flags::XI2_UNRELIABLE;
    }
    SeriesRow {
        t,
        sx,
        sy: m.mean[1],
        sz: m.mean[2],
        vyy,
        vzz,
        vyz,
        xi2,
        xi2_err,
        mxy,
        mxy_err,
        flags: f,
        sx_err: m.mean_err[0],
        sy_err: m.mean_err[1],
        sz_err: m.mean_err[2],
        vyy_err: m.second_err[1],
        vzz_err: m.second_err[2],
        vyz_err: m.second_err[5],
    }
}

/// Squeezing parameter, magnetization and their errors at every sample time.
pub fn squeezing_from_moments(acc: &MomentAccumulator, n_spins: usize, method: Method) -> ObservableSeries {
    let rows = acc
        .times()
        .iter()
        .enumerate()
        .map(|(k, &t)| observables_row(t, &acc.moments(k), n_spins))
        .collect();
    ObservableSeries { method, n_spins, rows }
}

/// Discrete phase point of the x-polarized product state for trajectory
/// `traj` of the stream keyed by `seed`.
pub fn sample_initial(n_spins: usize, seed_value: u64, traj: u64) -> SpinConfiguration {
    let mut rng = seed::rng(seed_value, &[seed::TRAJECTORY, traj]);
    let spins = (0..n_spins)
        .map(|_| {
            let y = if rng.random::<bool>() { 0.5 } else { -0.5 };
            let z = if rng.random::<bool>() { 0.5 } else { -0.5 };
            [0.5, y, z]
        })
        .collect();
    SpinConfiguration::new(spins)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOptions {
    /// Trajectories integrated together with a shared step size.
    pub batch_width: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions { batch_width: 16 }
    }
}

/// Outcome of integrating an ensemble of trajectories for one realization.
#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub acc: MomentAccumulator,
    pub monitor: ConservationMonitor,
    pub failed: usize,
    pub stats: StepStats,
}

/// Shared driver: split `n_traj` into fixed batches, run them in parallel and
/// merge the partial results in batch order.
pub(crate) fn run_batches<F>(
    n_traj: usize,
    icfg: &IntegratorConfig,
    opts: &EnsembleOptions,
    run: F,
) -> Result<EnsembleRun>
where
    F: Fn(u64, usize) -> Result<(MomentAccumulator, ConservationMonitor, StepStats)> + Sync,
{
    if n_traj < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 trajectories for a variance, got {n_traj}"
        )));
    }
    icfg.validate()?;
    let width = opts.batch_width.max(1);
    let n_batches = n_traj.div_ceil(width);
    let parts: Vec<_> = (0..n_batches)
        .into_par_iter()
        .map(|bi| {
            let first = (bi * width) as u64;
            let count = width.min(n_traj - bi * width);
            (count, run(first, count))
        })
        .collect();

    let mut out = EnsembleRun {
        acc: MomentAccumulator::new(icfg.sample_times.clone()),
        monitor: ConservationMonitor::default(),
        failed: 0,
        stats: StepStats::default(),
    };
    for (count, part) in parts {
        match part {
            Ok((acc, mon, stats)) => {
                out.acc.merge(&acc)?;
                out.monitor.merge(&mon);
                out.stats.accepted += stats.accepted;
                out.stats.rejected += stats.rejected;
                out.stats.evaluations += stats.evaluations;
            }
            Err(e) => {
                warn!("batch of {count} trajectories failed: {e}");
                out.failed += count;
            }
        }
    }
    if out.failed * 1000 > n_traj {
        return Err(Error::TooManyFailures {
            failed: out.failed,
            total: n_traj,
        });
    }
    Ok(out)
}

/// Integrate `n_traj` dTWA trajectories and accumulate collective moments.
pub fn run_ensemble<K: CouplingKernel>(
    kernel: &K,
    params: &ModelParams,
    icfg: &IntegratorConfig,
    n_traj: usize,
    seed_value: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    let n = kernel.n_spins();
    run_batches(n_traj, icfg, opts, |first, count| {
        let batch: Vec<_> = (0..count as u64)
            .map(|b| sample_initial(n, seed_value, first + b))
            .collect();
        let y0 = dynamics::pack(&batch);
        let mut acc = MomentAccumulator::new(icfg.sample_times.clone());
        let mut mon = SpinMonitor::new(kernel, params, &y0, n, count);
        let mut flow = SpinFlow::new(kernel, params, n, count);
        let stats = ode::integrate(&mut flow, &y0, icfg, |k, y| {
            for s in dynamics::collective(y, n, count) {
                acc.add_classical(k, s);
            }
            mon.observe(y);
        })?;
        Ok((acc, mon.monitor, stats))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice};
    use crate::ode::geometric_grid;

    #[test]
    fn phase_points_have_fixed_norm() {
        let cfg = sample_initial(50, 9, 3);
        for s in &cfg.spins {
            assert_eq!(s[0], 0.5);
            assert_eq!(s[0] * s[0] + s[1] * s[1] + s[2] * s[2], 0.75);
        }
        assert_eq!(cfg, sample_initial(50, 9, 3));
        assert_ne!(cfg, sample_initial(50, 9, 4));
    }

    #[test]
    fn coherent_moments_give_unit_squeezing() {
        let n = 40;
        let m = Moments {
            mean: [n as f64 / 2.0, 0.0, 0.0],
            cov: [0.0, n as f64 / 4.0, n as f64 / 4.0, 0.0, 0.0, 0.0],
            ..Default::default()
        };
        let row = observables_row(0.0, &m, n);
        assert_eq!(row.xi2, 1.0);
    }

    #[test]
    fn lambda_min_by_inspection() {
        assert_eq!(lambda_min(2.0, 1.0, 0.0), 1.0);
        assert_eq!(lambda_min(1.0, 1.0, 1.0), 0.0);
        assert_eq!(lambda_min(0.7, 0.7, 0.0), 0.7);
    }

    #[test]
    fn fully_polarized_magnetization_is_one() {
        let n = 10;
        let mut acc = MomentAccumulator::new(vec![0.0]);
        for _ in 0..4 {
            acc.add_classical(0, [5.0, 0.0, 0.0]);
        }
        let s = squeezing_from_moments(&acc, n, Method::Dtwa);
        assert_eq!(s.rows[0].mxy, 1.0);
        assert_eq!(s.rows[0].mxy_err, 0.0);
    }

    #[test]
    fn single_trajectory_is_rejected() {
        let lat = build_lattice(3, 0.0, 1).unwrap();
        let ct = build_couplings(&lat, &ModelParams::default()).unwrap();
        let icfg = IntegratorConfig::new(vec![0.0, 1.0]);
        let err = run_ensemble(&ct, &ModelParams::default(), &icfg, 1, 1, &EnsembleOptions::default());
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn merge_matches_single_pass() {
        let samples: Vec<Vec3> = (0..37)
            .map(|k| [k as f64 * 0.1, (k % 5) as f64, -(k as f64).sqrt()])
            .collect();
        let mut whole = MomentAccumulator::new(vec![0.0]);
        samples.iter().for_each(|&s| whole.add_classical(0, s));
        let mut left = MomentAccumulator::new(vec![0.0]);
        let mut right = MomentAccumulator::new(vec![0.0]);
        samples[..20].iter().for_each(|&s| left.add_classical(0, s));
        samples[20..].iter().for_each(|&s| right.add_classical(0, s));
        left.merge(&right).unwrap();
        let (a, b) = (whole.moments(0), left.moments(0));
        for m in 0..6 {
            assert!((a.cov[m] - b.cov[m]).abs() < 1e-12 * (1.0 + a.cov[m].abs()));
        }
        assert_eq!(left.n_samples(), 37);
    }

    #[test]
    fn transverse_covariance_merges() {
        let sample = |k: usize| {
            let x = k as f64;
            (
                [0.0; 3],
                [0.0, x.sin(), (0.3 * x).cos(), 0.0, 0.0, x.sin() * (0.7 * x).cos()],
            )
        };
        let mut whole = MomentAccumulator::new(vec![0.0]);
        let mut left = MomentAccumulator::new(vec![0.0]);
        let mut right = MomentAccumulator::new(vec![0.0]);
        for k in 0..41 {
            let (s, q) = sample(k);
            whole.add(0, s, q);
            if k < 13 {
                left.add(0, s, q)
            } else {
                right.add(0, s, q)
            }
        }
        left.merge(&right).unwrap();
        let (a, b) = (whole.moments(0).transverse_cov, left.moments(0).transverse_cov);
        for m in 0..6 {
            assert!((a[m] - b[m]).abs() < 1e-14);
        }
        // Diagonal entries are the squared standard errors of the second moments.
        let m = whole.moments(0);
        for (slot, idx) in TRANSVERSE.into_iter().enumerate() {
            assert!((m.transverse_cov[slot] - m.second_err[idx].powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn xi2_error_matches_seed_scatter() {
        let lat = build_lattice(8, 0.0, 1).unwrap();
        let params = ModelParams::xxz(-1.0);
        let ct = build_couplings(&lat, &params).unwrap();
        let icfg = IntegratorConfig::new(vec![0.0, 0.25, 0.5, 1.0]).with_tolerances(1e-8, 1e-10);
        let seeds = 48;
        let rows: Vec<Vec<SeriesRow>> = (0..seeds)
            .map(|seed| {
                let run = run_ensemble(&ct, &params, &icfg, 256, seed, &EnsembleOptions::default()).unwrap();
                squeezing_from_moments(&run.acc, lat.n_spins(), Method::Dtwa).rows
            })
            .collect();
        for k in 1..4 {
            let xs: Vec<f64> = rows.iter().map(|r| r[k].xi2).collect();
            let mean = xs.iter().sum::<f64>() / seeds as f64;
            let scatter = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64).sqrt();
            let reported = rows.iter().map(|r| r[k].xi2_err).sum::<f64>() / seeds as f64;
            let ratio = reported / scatter;
            assert!(mean < 1.0, "t index {k}: xi2 {mean}");
            assert!((0.7..1.4).contains(&ratio), "t index {k}: reported/scatter {ratio}");
        }
    }

    #[test]
    fn mismatched_grids_refuse_to_merge() {
        let mut a = MomentAccumulator::new(vec![0.0, 1.0]);
        let b = MomentAccumulator::new(vec![0.0, 2.0]);
        assert!(matches!(a.merge(&b), Err(Error::MismatchedGrids)));
    }

    #[test]
    fn heisenberg_point_is_frozen() {
        // Δ = J⊥ = 1 conserves the collective spin of every trajectory.
        let lat = build_lattice(4, 0.0, 2).unwrap();
        let params = ModelParams::xxz(1.0);
        let ct = build_couplings(&lat, &params).unwrap();
        let icfg = IntegratorConfig::new(geometric_grid(0.05, 5.0, 10));
        let run = run_ensemble(&ct, &params, &icfg, 2000, 17, &EnsembleOptions::default()).unwrap();
        let s = squeezing_from_moments(&run.acc, lat.n_spins(), Method::Dtwa);
        let first = s.rows[0];
        for r in &s.rows {
            assert!((r.sx - first.sx).abs() < 1e-6);
            assert!((r.vyy + r.vzz - first.vyy - first.vzz).abs() < 1e-5);
        }
    }

    #[test]
    fn worker_partition_does_not_change_results() {
        let lat = build_lattice(4, 0.2, 6).unwrap();
        let params = ModelParams::xxz(-1.0);
        let ct = build_couplings(&lat, &params).unwrap();
        let icfg = IntegratorConfig::new(geometric_grid(0.05, 2.0, 10));
        let opts = EnsembleOptions { batch_width: 4 };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_ensemble(&ct, &params, &icfg, 30, 5, &opts).unwrap());
        let b = three.install(|| run_ensemble(&ct, &params, &icfg, 30, 5, &opts).unwrap());
        assert_eq!(a.acc, b.acc);
    }
}
