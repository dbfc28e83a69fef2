//! Classical mean-field equations of motion for spin vectors.
//!
//! With `H = -Σ_{i<j} J_ij (J⊥(s^x_i s^x_j + s^y_i s^y_j) + Δ s^z_i s^z_j)`,
//! each spin precesses as `ds_i/dt = B_i × s_i` where `B_i = ∂H/∂s_i`. This is
//! the classical limit of `dŝ/dt = i[H, ŝ]` and reproduces the Heisenberg
//! equations for single-spin expectations to leading order.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::CouplingKernel;
use crate::lattice::{CouplingTable, ModelParams};
use crate::ode::{self, IntegratorConfig, OdeSystem, StepStats};

pub type Vec3 = [f64; 3];

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// One classical phase point: a three-vector per spin.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinConfiguration {
    pub spins: Vec<Vec3>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<Vec3>) -> Self {
        SpinConfiguration { spins }
    }

    pub fn n_spins(&self) -> usize {
        self.spins.len()
    }

    pub fn total(&self) -> Vec3 {
        self.spins
            .iter()
            .fold([0.0; 3], |acc, s| [acc[0] + s[0], acc[1] + s[1], acc[2] + s[2]])
    }
}

#[inline]
fn anisotropy(params: &ModelParams) -> Vec3 {
    [params.j_perp, params.j_perp, params.delta]
}

/// `B_i = -Σ_{j≠i} J_ij (J⊥ s^x_j, J⊥ s^y_j, Δ s^z_j)`, evaluated directly.
pub fn effective_field(i: usize, cfg: &SpinConfiguration, ct: &CouplingTable, params: &ModelParams) -> Vec3 {
    let c = anisotropy(params);
    let mut b = [0.0; 3];
    for (j, s) in cfg.spins.iter().enumerate() {
        if j == i {
            continue;
        }
        let w = ct.get(i, j);
        for a in 0..3 {
            b[a] -= w * c[a] * s[a];
        }
    }
    b
}

/// `ds_i/dt = B_i × s_i` for every spin.
pub fn derivative(cfg: &SpinConfiguration, ct: &CouplingTable, params: &ModelParams) -> Vec<Vec3> {
    let y = pack(std::slice::from_ref(cfg));
    let mut flow = SpinFlow::new(ct, params, cfg.n_spins(), 1);
    let mut dy = vec![0.0; y.len()];
    flow.rhs(&y, &mut dy);
    unpack(&dy, cfg.n_spins(), 1).remove(0).spins
}

/// Classical energy `H(s)` of one configuration.
pub fn classical_energy(cfg: &SpinConfiguration, ct: &CouplingTable, params: &ModelParams) -> f64 {
    let c = anisotropy(params);
    let mut e = 0.0;
    for i in 0..cfg.n_spins() {
        for j in (i + 1)..cfg.n_spins() {
            let (si, sj) = (cfg.spins[i], cfg.spins[j]);
            e -= ct.get(i, j) * (c[0] * si[0] * sj[0] + c[1] * si[1] * sj[1] + c[2] * si[2] * sj[2]);
        }
    }
    e
}

/// Interleave configurations into the batch layout `y[(3i + a) * width + b]`.
pub fn pack(batch: &[SpinConfiguration]) -> Vec<f64> {
    let width = batch.len();
    let n = batch.first().map_or(0, |c| c.n_spins());
    let mut y = vec![0.0; 3 * n * width];
    for (b, cfg) in batch.iter().enumerate() {
        assert_eq!(cfg.n_spins(), n, "batch members must have equal size");
        for (i, s) in cfg.spins.iter().enumerate() {
            for a in 0..3 {
                y[(3 * i + a) * width + b] = s[a];
            }
        }
    }
    y
}

pub fn unpack(y: &[f64], n: usize, width: usize) -> Vec<SpinConfiguration> {
    (0..width)
        .map(|b| {
            SpinConfiguration::new(
                (0..n)
                    .map(|i| {
                        [
                            y[3 * i * width + b],
                            y[(3 * i + 1) * width + b],
                            y[(3 * i + 2) * width + b],
                        ]
                    })
                    .collect(),
            )
        })
        .collect()
}

/// Collective spin `S = Σ_i s_i` of every batch member.
pub fn collective(y: &[f64], n: usize, width: usize) -> Vec<Vec3> {
    let mut out = vec![[0.0; 3]; width];
    for i in 0..n {
        for a in 0..3 {
            let row = &y[(3 * i + a) * width..(3 * i + a + 1) * width];
            for (o, v) in out.iter_mut().zip(row) {
                o[a] += v;
            }
        }
    }
    out
}

/// Batched precession flow over any coupling kernel.
pub struct SpinFlow<'a, K: CouplingKernel + ?Sized> {
    kernel: &'a K,
    aniso: Vec3,
    n: usize,
    width: usize,
    field: Vec<f64>,
}

impl<'a, K: CouplingKernel + ?Sized> SpinFlow<'a, K> {
    pub fn new(kernel: &'a K, params: &ModelParams, n: usize, width: usize) -> Self {
        assert_eq!(kernel.n_spins(), n);
        SpinFlow {
            kernel,
            aniso: anisotropy(params),
            n,
            width,
            field: vec![0.0; 3 * n * width],
        }
    }
}

impl<K: CouplingKernel + ?Sized> OdeSystem for SpinFlow<'_, K> {
    fn len(&self) -> usize {
        3 * self.n * self.width
    }

    fn batch_width(&self) -> usize {
        self.width
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
        let w = self.width;
        self.kernel.apply(y, &mut self.field, 3 * w);
        let [cx, cy, cz] = self.aniso;
        for i in 0..self.n {
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
    }
}

/// Worst drifts of the conserved quantities seen at the sample times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationMonitor {
    /// `max_i ||s_i(t)| - |s_i(0)|| / |s_i(0)|`.
    pub norm: f64,
    /// `|S^z(t) - S^z(0)| / (N/2)`.
    pub total_sz: f64,
    /// `|H(t) - H(0)| / max(|H(0)|, 0.1 H_scale)` with
    /// `H_scale = Σ_{i<j} |J_ij| (2|J⊥| + |Δ|) / 4`.
    pub energy: f64,
}

impl ConservationMonitor {
    pub fn merge(&mut self, other: &ConservationMonitor) {
        self.norm = self.norm.max(other.norm);
        self.total_sz = self.total_sz.max(other.total_sz);
        self.energy = self.energy.max(other.energy);
    }

    pub fn worst(&self) -> f64 {
        self.norm.max(self.total_sz).max(self.energy)
    }
}

/// Tracks conserved quantities of a spin batch against their initial values.
pub struct SpinMonitor<'a, K: CouplingKernel + ?Sized> {
    kernel: &'a K,
    aniso: Vec3,
    n: usize,
    width: usize,
    field: Vec<f64>,
    norms0: Vec<f64>,
    sz0: Vec<f64>,
    e0: Vec<f64>,
    e_scale: f64,
    pub monitor: ConservationMonitor,
}

impl<'a, K: CouplingKernel + ?Sized> SpinMonitor<'a, K> {
    pub fn new(kernel: &'a K, params: &ModelParams, y0: &[f64], n: usize, width: usize) -> Self {
        let aniso = anisotropy(params);
        let mut sum_j = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                sum_j += kernel.coupling(i, j).abs();
            }
        }
        let e_scale = sum_j * (2.0 * aniso[0].abs() + aniso[2].abs()) / 4.0;
        let mut m = SpinMonitor {
            kernel,
            aniso,
            n,
            width,
            field: vec![0.0; 3 * n * width],
            norms0: Vec::new(),
            sz0: Vec::new(),
            e0: Vec::new(),
            e_scale,
            monitor: ConservationMonitor::default(),
        };
        m.norms0 = m.norms(y0);
        m.sz0 = collective(y0, n, width).iter().map(|s| s[2]).collect();
        m.e0 = m.energies(y0);
        m
    }

    fn norms(&self, y: &[f64]) -> Vec<f64> {
        let w = self.width;
        let mut out = Vec::with_capacity(self.n * w);
        for i in 0..self.n {
            for b in 0..w {
                let base = 3 * i * w + b;
                out.push(norm([y[base], y[base + w], y[base + 2 * w]]));
            }
        }
        out
    }

    fn energies(&mut self, y: &[f64]) -> Vec<f64> {
        let w = self.width;
        self.kernel.apply(y, &mut self.field, 3 * w);
        let mut e = vec![0.0; w];
        for i in 0..self.n {
            for a in 0..3 {
                let off = (3 * i + a) * w;
                for b in 0..w {
                    e[b] -= 0.5 * self.aniso[a] * y[off + b] * self.field[off + b];
                }
            }
        }
        e
    }

    pub fn observe(&mut self, y: &[f64]) {
        let norms = self.norms(y);
        for (v, v0) in norms.iter().zip(&self.norms0) {
            if *v0 > 0.0 {
                self.monitor.norm = self.monitor.norm.max((v - v0).abs() / v0);
            }
        }
        let half_n = 0.5 * self.n as f64;
        for (s, s0) in collective(y, self.n, self.width).iter().zip(&self.sz0) {
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

/// A single sampled trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinConfiguration>,
    pub monitor: ConservationMonitor,
    pub stats: StepStats,
}

/// Integrate one configuration and return it at every sample time.
pub fn integrate(
    cfg0: &SpinConfiguration,
    ct: &CouplingTable,
    params: &ModelParams,
    icfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n = cfg0.n_spins();
    let y0 = pack(std::slice::from_ref(cfg0));
    let mut states = Vec::with_capacity(icfg.sample_times.len());
    let mut mon = SpinMonitor::new(ct, params, &y0, n, 1);
    let mut flow = SpinFlow::new(ct, params, n, 1);
    let stats = ode::integrate(&mut flow, &y0, icfg, |_, y| {
        mon.observe(y);
        states.push(unpack(y, n, 1).remove(0));
    })?;
    Ok(Trajectory {
        times: icfg.sample_times.clone(),
        states,
        monitor: mon.monitor,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, Boundary, LatticeRealization};
    use rand::{Rng, SeedableRng};

    fn pair(distance: u32) -> CouplingTable {
        let lat = LatticeRealization::from_sites(8, vec![(0, 0), (0, distance)], Boundary::Open).unwrap();
        build_couplings(&lat, &ModelParams::default()).unwrap()
    }

    fn random_cfg(n: usize, seed: u64) -> SpinConfiguration {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SpinConfiguration::new(
            (0..n)
                .map(|_| std::array::from_fn(|_| rng.random::<f64>() - 0.5))
                .collect(),
        )
    }

    #[test]
    fn lone_spin_feels_no_field() {
        let ct = CouplingTable::all_to_all(1, 1.0);
        let cfg = SpinConfiguration::new(vec![[0.5, 0.5, 0.5]]);
        assert_eq!(effective_field(0, &cfg, &ct, &ModelParams::default()), [0.0; 3]);
    }

    #[test]
    fn aligned_pair_field() {
        let cfg = SpinConfiguration::new(vec![[0.5, 0.0, 0.0]; 2]);
        let b = effective_field(0, &cfg, &pair(1), &ModelParams::xxz(-1.0));
        assert_eq!(b, [-0.5, 0.0, 0.0]);
    }

    #[test]
    fn orthogonal_pair_field_and_derivative() {
        let cfg = SpinConfiguration::new(vec![[0.5, 0.0, 0.0], [0.0, 0.0, 0.5]]);
        let params = ModelParams::xxz(-1.0);
        let ct = pair(1);
        assert_eq!(effective_field(0, &cfg, &ct, &params), [0.0, 0.0, 0.5]);
        let d = derivative(&cfg, &ct, &params);
        assert_eq!(d[0], [0.0, 0.25, 0.0]);
    }

    #[test]
    fn aligned_configuration_is_stationary() {
        let lat = build_lattice(5, 0.2, 3).unwrap();
        let ct = build_couplings(&lat, &ModelParams::default()).unwrap();
        let cfg = SpinConfiguration::new(vec![[0.3, -0.2, 0.4]; lat.n_spins()]);
        for d in derivative(&cfg, &ct, &ModelParams::xxz(1.0)) {
            assert!(d.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn total_sz_derivative_vanishes() {
        let lat = build_lattice(7, 0.3, 11).unwrap();
        let params = ModelParams::xxz(-1.7);
        let ct = build_couplings(&lat, &params).unwrap();
        let cfg = random_cfg(lat.n_spins(), 4);
        let total: f64 = derivative(&cfg, &ct, &params).iter().map(|d| d[2]).sum();
        assert!(total.abs() < 1e-14, "{total}");
    }

    #[test]
    fn batched_derivative_matches_direct_fields() {
        let lat = build_lattice(6, 0.25, 5).unwrap();
        let params = ModelParams::xxz(-0.6);
        let ct = build_couplings(&lat, &params).unwrap();
        let n = lat.n_spins();
        let batch: Vec<_> = (0..5).map(|s| random_cfg(n, s)).collect();
        let y = pack(&batch);
        let mut dy = vec![0.0; y.len()];
        SpinFlow::new(&ct, &params, n, batch.len()).rhs(&y, &mut dy);
        for (b, cfg) in unpack(&dy, n, batch.len()).iter().zip(&batch) {
            for i in 0..n {
                let expect = cross(effective_field(i, cfg, &ct, &params), cfg.spins[i]);
                for a in 0..3 {
                    assert!((b.spins[i][a] - expect[a]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_derivative_state_stays_constant() {
        let ct = pair(1);
        let cfg = SpinConfiguration::new(vec![[0.5, 0.0, 0.0]; 2]);
        let icfg = IntegratorConfig::new(ode::geometric_grid(0.05, 50.0, 10));
        let traj = integrate(&cfg, &ct, &ModelParams::xxz(1.0), &icfg).unwrap();
        for s in &traj.states {
            assert_eq!(s, &cfg);
        }
    }

    #[test]
    fn two_spins_conserve_norm_and_energy() {
        let ct = pair(1);
        let params = ModelParams::xxz(-1.0);
        let cfg = SpinConfiguration::new(vec![[0.5, 0.5, -0.5], [0.5, -0.5, 0.5]]);
        let icfg = IntegratorConfig::new(ode::geometric_grid(0.05, 10.0, 40));
        let traj = integrate(&cfg, &ct, &params, &icfg).unwrap();
        assert!(traj.monitor.norm < 1e-8, "{:?}", traj.monitor);
        assert!(traj.monitor.energy < 1e-8, "{:?}", traj.monitor);
        let e0 = classical_energy(&cfg, &ct, &params);
        let e1 = classical_energy(traj.states.last().unwrap(), &ct, &params);
        assert!(((e1 - e0) / e0).abs() < 1e-8);
    }
}
