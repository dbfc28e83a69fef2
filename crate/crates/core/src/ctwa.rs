//! Cluster truncated Wigner dynamics with two-spin clusters.
//!
//! Each pair carries the Weyl symbols of the 15 operators
//! `{s^α⊗1, 1⊗s^β, s^α⊗s^β}`. Inside a pair the dynamics is the exact
//! Heisenberg flow of that operator algebra; between clusters only one-site
//! variables couple, through the same mean field as dTWA. Spins left unpaired
//! evolve as plain dTWA spins.
//!
//! Batch layout: the first `3 N K` entries hold the one-site variables in the
//! dTWA layout `(3i + a) K + b`; then pair `p` stores its two-site variable
//! `s^α⊗s^β` at `(9p + 3α + β) K + b`.

use std::path::Path;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dtwa::{self, EnsembleOptions, EnsembleRun, MomentAccumulator, ObservableSeries, PAIRS};
use crate::dynamics::{self, ConservationMonitor, SpinConfiguration, Vec3};
use crate::error::{Error, Result};
use crate::io;
use crate::kernel::CouplingKernel;
use crate::lattice::{CouplingTable, ModelParams};
use crate::ode::{self, IntegratorConfig, OdeSystem};

/// Spins grouped into pairs plus the spins that stay alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub n_spins: usize,
    /// Pairs `(i, j)` with `i < j`, in selection order.
    pub pairs: Vec<(usize, usize)>,
    /// Unpaired spins, ascending. Greedy pairing leaves at most one.
    pub singletons: Vec<usize>,
}

impl ClusterPartition {
    /// Every spin its own cluster; the cluster flow then equals dTWA.
    pub fn all_singletons(n_spins: usize) -> Self {
        ClusterPartition {
            n_spins,
            pairs: Vec::new(),
            singletons: (0..n_spins).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n_spins];
        let members = self
            .pairs
            .iter()
            .flat_map(|&(i, j)| [i, j])
            .chain(self.singletons.iter().copied());
        for i in members {
            if i >= self.n_spins || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "spin {i} missing from or repeated in partition"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("partition does not cover every spin".into()));
        }
        Ok(())
    }

    /// Cluster partner of every spin, if any.
    pub fn partners(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_spins];
        for &(i, j) in &self.pairs {
            out[i] = Some(j);
            out[j] = Some(i);
        }
        out
    }
}

/// Greedy strongest-pair matching. Ties go to the lexicographically smallest
/// `(i, j)`.
pub fn pair_spins(ct: &CouplingTable) -> ClusterPartition {
    let n = ct.n_spins();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            candidates.push((ct.get(i, j), i, j));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for (_, i, j) in candidates {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
    }
    let singletons = (0..n).filter(|&i| !used[i]).collect();
    ClusterPartition {
        n_spins: n,
        pairs,
        singletons,
    }
}

pub const BASIS: usize = 15;

/// Index of `s^α⊗s^β` in the cluster basis.
#[inline]
pub fn two_site(alpha: usize, beta: usize) -> usize {
    6 + 3 * alpha + beta
}

fn spin_matrix(axis: usize) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let h = |re: f64, im: f64| Complex64::new(re, im);
    match axis {
        0 => [[z, h(0.5, 0.0)], [h(0.5, 0.0), z]],
        1 => [[z, h(0.0, -0.5)], [h(0.0, 0.5), z]],
        _ => [[h(0.5, 0.0), z], [z, h(-0.5, 0.0)]],
    }
}

fn kron(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, c| a[r / 2][c / 2] * b[r % 2][c % 2])
}

/// The 4×4 matrix of basis operator `a`.
pub fn basis_matrix(a: usize) -> Matrix4<Complex64> {
    let one = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    match a {
        0..=2 => kron(&spin_matrix(a), &one),
        3..=5 => kron(&one, &spin_matrix(a - 3)),
        _ => kron(&spin_matrix((a - 6) / 3), &spin_matrix((a - 6) % 3)),
    }
}

/// `[Γ_a, Γ_b] = i Σ_c f_abc Γ_c` over the 15-element cluster basis.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    dense: Vec<f64>,
    /// Nonzero entries `(a, b, c, f_abc)`.
    pub nonzero: Vec<(u8, u8, u8, f64)>,
}

impl StructureConstants {
    pub fn new() -> Self {
        let gammas: Vec<Matrix4<Complex64>> = (0..BASIS).map(basis_matrix).collect();
        let norms: Vec<f64> = gammas.iter().map(|g| (g * g).trace().re).collect();
        let mut dense = vec![0.0; BASIS * BASIS * BASIS];
        let mut nonzero = Vec::new();
        for a in 0..BASIS {
            for b in 0..BASIS {
                let comm = gammas[a] * gammas[b] - gammas[b] * gammas[a];
                for c in 0..BASIS {
                    // Tr(Γ_c Γ_d) = δ_cd Tr(Γ_c²), so projecting picks out f_abc.
                    let f = ((comm * gammas[c]).trace() / Complex64::new(0.0, norms[c])).re;
                    let f = if f.abs() < 1e-14 { 0.0 } else { f };
                    dense[(a * BASIS + b) * BASIS + c] = f;
                    if f != 0.0 {
                        nonzero.push((a as u8, b as u8, c as u8, f));
                    }
                }
            }
        }
        StructureConstants { dense, nonzero }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.dense[(a * BASIS + b) * BASIS + c]
    }

    /// `dx_a = Σ_{b,c} f_abc h_b x_c`.
    #[inline]
    pub fn flow(&self, h: &[f64; BASIS], x: &[f64; BASIS], dx: &mut [f64; BASIS]) {
        *dx = [0.0; BASIS];
        for &(a, b, c, f) in &self.nonzero {
            dx[a as usize] += f * h[b as usize] * x[c as usize];
        }
    }
}

impl Default for StructureConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// One cluster phase point: one-site variables of every spin and the nine
/// two-site variables of every pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterPhasePoint {
    pub one_site: Vec<Vec3>,
    pub two_site: Vec<[f64; 9]>,
}

impl ClusterPhasePoint {
    /// Factorized start: two-site variables are products of the one-site draws.
    pub fn from_spins(cfg: &SpinConfiguration, partition: &ClusterPartition) -> Self {
        let two_site = partition
            .pairs
            .iter()
            .map(|&(i, j)| {
                let (si, sj) = (cfg.spins[i], cfg.spins[j]);
                std::array::from_fn(|k| si[k / 3] * sj[k % 3])
            })
            .collect();
        ClusterPhasePoint {
            one_site: cfg.spins.clone(),
            two_site,
        }
    }

    /// The 15 variables of pair `p`.
    pub fn cluster(&self, partition: &ClusterPartition, p: usize) -> [f64; BASIS] {
        let (i, j) = partition.pairs[p];
        let mut x = [0.0; BASIS];
        x[..3].copy_from_slice(&self.one_site[i]);
        x[3..6].copy_from_slice(&self.one_site[j]);
        x[6..].copy_from_slice(&self.two_site[p]);
        x
    }
}

pub fn pack(batch: &[ClusterPhasePoint]) -> Vec<f64> {
    let w = batch.len();
    let configs: Vec<SpinConfiguration> = batch
        .iter()
        .map(|p| SpinConfiguration::new(p.one_site.clone()))
        .collect();
    let mut y = dynamics::pack(&configs);
    let n_pairs = batch.first().map_or(0, |p| p.two_site.len());
    let mut tail = vec![0.0; 9 * n_pairs * w];
    for (b, pt) in batch.iter().enumerate() {
        for (p, xs) in pt.two_site.iter().enumerate() {
            for (k, &v) in xs.iter().enumerate() {
                tail[(9 * p + k) * w + b] = v;
            }
        }
    }
    y.extend(tail);
    y
}

pub fn unpack(y: &[f64], n: usize, n_pairs: usize, width: usize) -> Vec<ClusterPhasePoint> {
    let one = dynamics::unpack(&y[..3 * n * width], n, width);
    let tail = &y[3 * n * width..];
    one.into_iter()
        .enumerate()
        .map(|(b, cfg)| ClusterPhasePoint {
            one_site: cfg.spins,
            two_site: (0..n_pairs)
                .map(|p| std::array::from_fn(|k| tail[(9 * p + k) * width + b]))
                .collect(),
        })
        .collect()
}

/// Batched cluster flow.
pub struct ClusterFlow<'a, K: CouplingKernel + ?Sized> {
    kernel: &'a K,
    partition: &'a ClusterPartition,
    f: &'a StructureConstants,
    aniso: Vec3,
    pair_j: Vec<f64>,
    width: usize,
    field: Vec<f64>,
}

impl<'a, K: CouplingKernel + ?Sized> ClusterFlow<'a, K> {
    pub fn new(
        kernel: &'a K,
        partition: &'a ClusterPartition,
        f: &'a StructureConstants,
        params: &ModelParams,
        width: usize,
    ) -> Self {
        let n = kernel.n_spins();
        assert_eq!(partition.n_spins, n);
        ClusterFlow {
            kernel,
            partition,
            f,
            aniso: [params.j_perp, params.j_perp, params.delta],
            pair_j: partition.pairs.iter().map(|&(i, j)| kernel.coupling(i, j)).collect(),
            width,
            field: vec![0.0; 3 * n * width],
        }
    }

    fn n(&self) -> usize {
        self.partition.n_spins
    }
}

impl<K: CouplingKernel + ?Sized> OdeSystem for ClusterFlow<'_, K> {
    fn len(&self) -> usize {
        (3 * self.n() + 9 * self.partition.pairs.len()) * self.width
    }

    fn batch_width(&self) -> usize {
        self.width
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
        let w = self.width;
        let n = self.n();
        let one = 3 * n * w;
        self.kernel.apply(&y[..one], &mut self.field, 3 * w);
        let [cx, cy, cz] = self.aniso;
        // Unpaired spins precess exactly as in dTWA.
        for &i in &self.partition.singletons {
            let base = 3 * i * w;
            for b in 0..w {
                let (ix, iy, iz) = (base + b, base + w + b, base + 2 * w + b);
                let bx = -cx * self.field[ix];
                let by = -cy * self.field[iy];
                let bz = -cz * self.field[iz];
                let (sx, sy, sz) = (y[ix], y[iy], y[iz]);
                dy[ix] = by * sz - bz * sy;
                dy[iy] = bz * sx - bx * sz;
                dy[iz] = bx * sy - by * sx;
            }
        }
        let c = self.aniso;
        let mut x = [0.0; BASIS];
        let mut h = [0.0; BASIS];
        let mut dx = [0.0; BASIS];
        for (p, &(i, j)) in self.partition.pairs.iter().enumerate() {
            let jij = self.pair_j[p];
            let pair_base = one + 9 * p * w;
            for b in 0..w {
                for a in 0..3 {
                    let ia = (3 * i + a) * w + b;
                    let ja = (3 * j + a) * w + b;
                    x[a] = y[ia];
                    x[3 + a] = y[ja];
                    // Inter-cluster mean field: full field minus the partner.
                    h[a] = -c[a] * (self.field[ia] - jij * y[ja]);
                    h[3 + a] = -c[a] * (self.field[ja] - jij * y[ia]);
                }
                for k in 0..9 {
                    x[6 + k] = y[pair_base + k * w + b];
                    h[6 + k] = 0.0;
                }
                for a in 0..3 {
                    h[two_site(a, a)] = -jij * c[a];
                }
                self.f.flow(&h, &x, &mut dx);
                for a in 0..3 {
                    dy[(3 * i + a) * w + b] = dx[a];
                    dy[(3 * j + a) * w + b] = dx[3 + a];
                }
                for k in 0..9 {
                    dy[pair_base + k * w + b] = dx[6 + k];
                }
            }
        }
    }
}

/// Per-trajectory collective mean and second-moment estimate.
///
/// Same-site products inside a pair use the operator identity
/// `{s^a, s^b}/2 = δ_ab/4`; cross terms inside a pair use the two-site
/// variables; everything else uses classical products.
fn collective_estimates(y: &[f64], partition: &ClusterPartition, width: usize, out: &mut Vec<(Vec3, [f64; 6])>) {
    let n = partition.n_spins;
    let one = 3 * n * width;
    out.clear();
    for s in dynamics::collective(&y[..one], n, width) {
        out.push((s, PAIRS.map(|(a, b)| s[a] * s[b])));
    }
    let at = |i: usize, a: usize, b: usize| y[(3 * i + a) * width + b];
    for (p, &(i, j)) in partition.pairs.iter().enumerate() {
        let base = one + 9 * p * width;
        for (b, (_, q)) in out.iter_mut().enumerate() {
            for (m, &(a1, a2)) in PAIRS.iter().enumerate() {
                let same = if a1 == a2 { 0.5 } else { 0.0 };
                let classical = at(i, a1, b) * at(i, a2, b)
                    + at(j, a1, b) * at(j, a2, b)
                    + at(i, a1, b) * at(j, a2, b)
                    + at(j, a1, b) * at(i, a2, b);
                let quantum = same + y[base + (3 * a1 + a2) * width + b] + y[base + (3 * a2 + a1) * width + b];
                q[m] += quantum - classical;
            }
        }
    }
}

/// Conserved quantities of the cluster flow.
struct ClusterMonitor<'a, K: CouplingKernel + ?Sized> {
    kernel: &'a K,
    partition: &'a ClusterPartition,
    aniso: Vec3,
    pair_j: Vec<f64>,
    width: usize,
    field: Vec<f64>,
    casimir0: Vec<f64>,
    sz0: Vec<f64>,
    e0: Vec<f64>,
    e_scale: f64,
    monitor: ConservationMonitor,
}

impl<'a, K: CouplingKernel + ?Sized> ClusterMonitor<'a, K> {
    fn new(kernel: &'a K, partition: &'a ClusterPartition, params: &ModelParams, y0: &[f64], width: usize) -> Self {
        let n = partition.n_spins;
        let aniso = [params.j_perp, params.j_perp, params.delta];
        let mut sum_j = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum_j += kernel.coupling(i, j).abs();
            }
        }
        let mut m = ClusterMonitor {
            kernel,
            partition,
            aniso,
            pair_j: partition.pairs.iter().map(|&(i, j)| kernel.coupling(i, j)).collect(),
            width,
            field: vec![0.0; 3 * n * width],
            casimir0: Vec::new(),
            sz0: Vec::new(),
            e0: Vec::new(),
            e_scale: sum_j * (2.0 * aniso[0].abs() + aniso[2].abs()) / 4.0,
            monitor: ConservationMonitor::default(),
        };
        m.casimir0 = m.casimirs(y0);
        m.sz0 = dynamics::collective(&y0[..3 * n * width], n, width)
            .iter()
            .map(|s| s[2])
            .collect();
        m.e0 = m.energies(y0);
        m
    }

    /// `sqrt(Σ_a x_a² / Tr(Γ_a²))` per cluster and trajectory; the flow
    /// preserves it because `f_abc Tr(Γ_c²)` is totally antisymmetric.
    fn casimirs(&self, y: &[f64]) -> Vec<f64> {
        let w = self.width;
        let n = self.partition.n_spins;
        let at = |i: usize, a: usize, b: usize| y[(3 * i + a) * w + b];
        let mut out = Vec::new();
        for &i in &self.partition.singletons {
            for b in 0..w {
                out.push(dynamics::norm([at(i, 0, b), at(i, 1, b), at(i, 2, b)]));
            }
        }
        for (p, &(i, j)) in self.partition.pairs.iter().enumerate() {
            let base = 3 * n * w + 9 * p * w;
            for b in 0..w {
                let mut c = 0.0;
                for a in 0..3 {
                    c += at(i, a, b).powi(2) + at(j, a, b).powi(2);
                }
                for k in 0..9 {
                    c += 4.0 * y[base + k * w + b].powi(2);
                }
                out.push(c.sqrt());
            }
        }
        out
    }

    /// Weyl-symbol energy per trajectory.
    fn energies(&mut self, y: &[f64]) -> Vec<f64> {
        let w = self.width;
        let n = self.partition.n_spins;
        let one = 3 * n * w;
        self.kernel.apply(&y[..one], &mut self.field, 3 * w);
        let mut e = vec![0.0; w];
        for i in 0..n {
            for a in 0..3 {
                let off = (3 * i + a) * w;
                for b in 0..w {
                    e[b] -= 0.5 * self.aniso[a] * y[off + b] * self.field[off + b];
                }
            }
        }
        for (p, &(i, j)) in self.partition.pairs.iter().enumerate() {
            let base = one + 9 * p * w;
            for b in 0..w {
                for a in 0..3 {
                    let classical = y[(3 * i + a) * w + b] * y[(3 * j + a) * w + b];
                    e[b] -= self.pair_j[p] * self.aniso[a] * (y[base + 4 * a * w + b] - classical);
                }
            }
        }
        e
    }

    fn observe(&mut self, y: &[f64]) {
        let n = self.partition.n_spins;
        for (v, v0) in self.casimirs(y).iter().zip(&self.casimir0) {
            if *v0 > 0.0 {
                self.monitor.norm = self.monitor.norm.max((v - v0).abs() / v0);
            }
        }
        let half_n = 0.5 * n as f64;
        for (s, s0) in dynamics::collective(&y[..3 * n * self.width], n, self.width)
            .iter()
            .zip(&self.sz0)
        {
            self.monitor.total_sz = self.monitor.total_sz.max((s[2] - s0).abs() / half_n);
        }
        let es = self.energies(y);
        for (e, e0) in es.iter().zip(&self.e0) {
            let scale = e0.abs().max(0.1 * self.e_scale);
            if scale > 0.0 {
                self.monitor.energy = self.monitor.energy.max((e - e0).abs() / scale);
            }
        }
    }
}

/// Integrate one cluster phase point and return it at every sample time.
pub fn integrate_phase_point<K: CouplingKernel>(
    x0: &ClusterPhasePoint,
    kernel: &K,
    partition: &ClusterPartition,
    params: &ModelParams,
    icfg: &IntegratorConfig,
) -> Result<(Vec<ClusterPhasePoint>, ConservationMonitor)> {
    partition.validate()?;
    let f = StructureConstants::new();
    let y0 = pack(std::slice::from_ref(x0));
    let mut flow = ClusterFlow::new(kernel, partition, &f, params, 1);
    let mut mon = ClusterMonitor::new(kernel, partition, params, &y0, 1);
    let mut out = Vec::with_capacity(icfg.sample_times.len());
    ode::integrate(&mut flow, &y0, icfg, |_, y| {
        mon.observe(y);
        out.push(unpack(y, partition.n_spins, partition.pairs.len(), 1).remove(0));
    })?;
    Ok((out, mon.monitor))
}

/// Integrate `n_traj` cluster trajectories. Initial one-site draws coincide
/// with the dTWA draws for the same seed and trajectory index.
pub fn run_ctwa_ensemble<K: CouplingKernel>(
    kernel: &K,
    partition: &ClusterPartition,
    params: &ModelParams,
    icfg: &IntegratorConfig,
    n_traj: usize,
    seed_value: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    partition.validate()?;
    let n = kernel.n_spins();
    if partition.n_spins != n {
        return Err(Error::InvalidParameter(
            "partition size differs from coupling table".into(),
        ));
    }
    let f = StructureConstants::new();
    dtwa::run_batches(n_traj, icfg, opts, |first, count| {
        let batch: Vec<_> = (0..count as u64)
            .map(|b| ClusterPhasePoint::from_spins(&dtwa::sample_initial(n, seed_value, first + b), partition))
            .collect();
        let y0 = pack(&batch);
        let mut acc = MomentAccumulator::new(icfg.sample_times.clone());
        let mut mon = ClusterMonitor::new(kernel, partition, params, &y0, count);
        let mut flow = ClusterFlow::new(kernel, partition, &f, params, count);
        let mut est = Vec::with_capacity(count);
        let stats = ode::integrate(&mut flow, &y0, icfg, |k, y| {
            collective_estimates(y, partition, count, &mut est);
            for &(s, q) in &est {
                acc.add(k, s, q);
            }
            mon.observe(y);
        })?;
        Ok((acc, mon.monitor, stats))
    })
}

/// One row of a dTWA/cTWA comparison table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub t: f64,
    pub xi2_dtwa: f64,
    pub xi2_ctwa: f64,
    pub combined_err: f64,
}

pub fn overlay(dtwa: &ObservableSeries, ctwa: &ObservableSeries) -> Result<Vec<OverlayRow>> {
    if dtwa.times() != ctwa.times() {
        return Err(Error::MismatchedGrids);
    }
    Ok(dtwa
        .rows
        .iter()
        .zip(&ctwa.rows)
        .map(|(d, c)| OverlayRow {
            t: d.t,
            xi2_dtwa: d.xi2,
            xi2_ctwa: c.xi2,
            combined_err: d.xi2_err.hypot(c.xi2_err),
        })
        .collect())
}

pub fn write_overlay_csv(rows: &[OverlayRow], path: &Path, config_hash: &str) -> Result<()> {
    let mut buf = io::provenance("overlay", config_hash);
    buf.push_str("\nt,xi2_dtwa,xi2_ctwa,combined_err\n");
    for r in rows {
        buf.push_str(&format!(
            "{},{},{},{}\n",
            io::num(r.t),
            io::num(r.xi2_dtwa),
            io::num(r.xi2_ctwa),
            io::num(r.combined_err)
        ));
    }
    io::write_atomic(path, buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtwa::{run_ensemble, squeezing_from_moments, Method};
    use crate::exact::{Axis, ExactEvolution, DEFAULT_CAP};
    use crate::lattice::{build_couplings, build_lattice, Boundary, LatticeRealization};
    use crate::ode::geometric_grid;

    fn line(xs: &[u32]) -> LatticeRealization {
        LatticeRealization::from_sites(16, xs.iter().map(|&x| (0, x)).collect(), Boundary::Open).unwrap()
    }

    #[test]
    fn collinear_triple_pairs_the_close_spins() {
        let params = ModelParams::default();
        let ct = build_couplings(&line(&[0, 1, 3]), &params).unwrap();
        let p = pair_spins(&ct);
        assert_eq!(p.pairs, vec![(0, 1)]);
        assert_eq!(p.singletons, vec![2]);
        let two = build_couplings(&line(&[4, 9]), &params).unwrap();
        assert_eq!(pair_spins(&two).pairs, vec![(0, 1)]);
    }

    #[test]
    fn greedy_matches_rescan() {
        let lat = build_lattice(6, 0.45, 21).unwrap();
        let ct = build_couplings(&lat, &ModelParams::default()).unwrap();
        let n = ct.n_spins();
        let mut free: Vec<bool> = vec![true; n];
        let mut expect = Vec::new();
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..n {
                for j in (i + 1)..n {
                    if free[i] && free[j] && best.is_none_or(|(v, _, _)| ct.get(i, j) > v) {
                        best = Some((ct.get(i, j), i, j));
                    }
                }
            }
            let Some((_, i, j)) = best else { break };
            free[i] = false;
            free[j] = false;
            expect.push((i, j));
        }
        let got = pair_spins(&ct);
        assert_eq!(got.pairs, expect);
        assert_eq!(got.singletons.len(), n % 2);
        got.validate().unwrap();
    }

    #[test]
    fn structure_constants_reproduce_commutators() {
        let f = StructureConstants::new();
        let g: Vec<_> = (0..BASIS).map(basis_matrix).collect();
        for a in 0..BASIS {
            for b in 0..BASIS {
                let comm = g[a] * g[b] - g[b] * g[a];
                let mut rebuilt = Matrix4::<Complex64>::zeros();
                for c in 0..BASIS {
                    rebuilt += g[c] * Complex64::new(0.0, f.get(a, b, c));
                    assert_eq!(f.get(a, b, c), -f.get(b, a, c));
                }
                assert!((comm - rebuilt).norm() < 1e-14, "a={a} b={b}");
            }
        }
        // su(2) on each site: f = ε.
        assert_eq!(f.get(0, 1, 2), 1.0);
        assert_eq!(f.get(4, 5, 3), 1.0);
        assert_eq!(f.get(0, 3, 2), 0.0);
    }

    #[test]
    fn isolated_pair_is_exact() {
        for delta in [-1.0, -2.0, 0.3] {
            let params = ModelParams::xxz(delta);
            let ct = build_couplings(&line(&[0, 1]), &params).unwrap();
            let part = pair_spins(&ct);
            // Phase point equal to the quantum expectations of |→→⟩.
            let x0 = ClusterPhasePoint::from_spins(&SpinConfiguration::new(vec![[0.5, 0.0, 0.0]; 2]), &part);
            let icfg = IntegratorConfig::new(geometric_grid(0.05, 20.0, 10));
            let (traj, mon) = integrate_phase_point(&x0, &ct, &part, &params, &icfg).unwrap();
            let evo = ExactEvolution::new(&ct, &params, DEFAULT_CAP).unwrap();
            for (t, pt) in icfg.sample_times.iter().zip(&traj) {
                let psi = evo.state_at(*t);
                for (a, axis) in Axis::ALL.iter().enumerate() {
                    assert!((pt.one_site[0][a] - psi.expect_spin(0, *axis)).abs() < 1e-8);
                    assert!((pt.one_site[1][a] - psi.expect_spin(1, *axis)).abs() < 1e-8);
                    for (b, bxis) in Axis::ALL.iter().enumerate() {
                        let exact = psi.expect_pair(0, *axis, 1, *bxis);
                        assert!((pt.two_site[0][3 * a + b] - exact).abs() < 1e-8);
                    }
                }
            }
            assert!(mon.worst() < 1e-8, "{mon:?}");
        }
    }

    #[test]
    fn all_singletons_reduce_to_dtwa_bitwise() {
        let lat = build_lattice(3, 0.2, 8).unwrap();
        let params = ModelParams::xxz(-1.0);
        let ct = build_couplings(&lat, &params).unwrap();
        let part = ClusterPartition::all_singletons(ct.n_spins());
        let icfg = IntegratorConfig::new(geometric_grid(0.05, 5.0, 10));
        let opts = EnsembleOptions { batch_width: 4 };
        let a = run_ensemble(&ct, &params, &icfg, 12, 3, &opts).unwrap();
        let b = run_ctwa_ensemble(&ct, &part, &params, &icfg, 12, 3, &opts).unwrap();
        assert_eq!(a.acc, b.acc);
    }

    #[test]
    fn decoupled_clusters_evolve_independently() {
        let params = ModelParams::xxz(-1.0);
        let lat = line(&[0, 1, 5, 6]);
        let ct = build_couplings(&lat, &params).unwrap();
        let part = pair_spins(&ct);
        assert_eq!(part.pairs, vec![(0, 1), (2, 3)]);
        let keep = |i: usize, j: usize| part.partners()[i] == Some(j);
        let cut = ct.with_zeroed(keep);
        let cfg = dtwa::sample_initial(4, 5, 0);
        let x0 = ClusterPhasePoint::from_spins(&cfg, &part);
        let icfg = IntegratorConfig::new(vec![0.0, 3.0]);
        let (both, mon) = integrate_phase_point(&x0, &cut, &part, &params, &icfg).unwrap();
        assert!(mon.total_sz < 1e-12);
        let single = build_couplings(&line(&[0, 1]), &params).unwrap();
        let sub = pair_spins(&single);
        let x1 = ClusterPhasePoint::from_spins(&SpinConfiguration::new(cfg.spins[2..].to_vec()), &sub);
        let (alone, _) = integrate_phase_point(&x1, &single, &sub, &params, &icfg).unwrap();
        for a in 0..3 {
            assert!((both[1].one_site[2][a] - alone[1].one_site[0][a]).abs() < 1e-7);
        }
    }

    #[test]
    fn collective_estimate_of_single_pair_is_linear() {
        // At the exact phase point of |→→⟩ the estimator returns the exact moments.
        let params = ModelParams::xxz(-1.0);
        let ct = build_couplings(&line(&[0, 1]), &params).unwrap();
        let part = pair_spins(&ct);
        let x0 = ClusterPhasePoint::from_spins(&SpinConfiguration::new(vec![[0.5, 0.0, 0.0]; 2]), &part);
        let y = pack(&[x0]);
        let mut est = Vec::new();
        collective_estimates(&y, &part, 1, &mut est);
        let (s, q) = est[0];
        assert_eq!(s, [1.0, 0.0, 0.0]);
        // ⟨(S^x)²⟩ = 1, ⟨(S^y)²⟩ = ⟨(S^z)²⟩ = 1/2.
        assert_eq!(q, [1.0, 0.5, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pair_ensemble_tracks_exact_squeezing() {
        let params = ModelParams::xxz(-1.0);
        let ct = build_couplings(&line(&[0, 1]), &params).unwrap();
        let part = pair_spins(&ct);
        let times = geometric_grid(0.05, 10.0, 10);
        let icfg = IntegratorConfig::new(times.clone());
        let run = run_ctwa_ensemble(&ct, &part, &params, &icfg, 4000, 11, &EnsembleOptions::default()).unwrap();
        let c = squeezing_from_moments(&run.acc, 2, Method::Ctwa);
        let e = crate::exact::evolve_exact(&ct, &params, &times, DEFAULT_CAP).unwrap();
        for (r, x) in c.rows.iter().zip(&e.rows) {
            assert!((r.sx - x.sx).abs() < 5.0 * r.sx_err + 1e-7);
            assert!(
                (r.xi2 - x.xi2).abs() < 5.0 * r.xi2_err + 1e-7,
                "t={} {} vs {}",
                r.t,
                r.xi2,
                x.xi2
            );
        }
    }

    #[test]
    fn coupled_pairs_are_exact_in_the_ising_limit() {
        // J⊥ = 0: every z component is frozen, so <S^x> is exact across clusters too.
        let lat = build_lattice(4, 0.3, 1).unwrap();
        let params = ModelParams::ising(-1.0);
        let ct = build_couplings(&lat, &params).unwrap();
        let part = pair_spins(&ct);
        assert!(part.pairs.len() > 1);
        let times = geometric_grid(0.05, 2.0, 10);
        let icfg = IntegratorConfig::new(times.clone()).with_tolerances(1e-9, 1e-11);
        let run = run_ctwa_ensemble(&ct, &part, &params, &icfg, 4000, 2, &EnsembleOptions::default()).unwrap();
        let c = squeezing_from_moments(&run.acc, lat.n_spins(), Method::Ctwa);
        let e = crate::exact::evolve_exact(&ct, &params, &times, DEFAULT_CAP).unwrap();
        for (r, x) in c.rows.iter().zip(&e.rows) {
            assert!(
                (r.sx - x.sx).abs() < 4.0 * r.sx_err + 1e-9,
                "t={} {} vs {}",
                r.t,
                r.sx,
                x.sx
            );
        }
    }
}
