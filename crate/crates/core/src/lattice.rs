//! Diluted square lattices and the couplings derived from them.
//!
//! A realization occupies each of the `L²` sites independently with
//! probability `f = 1 - p`. Couplings follow `J_ij = J / r_ij^β` with `r_ij`
//! the in-plane distance, either open (no images) or minimum-image periodic.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Resampling budget for realizations that come out empty.
pub const MAX_ATTEMPTS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Parameters of the power-law XXZ Hamiltonian
/// `H = -Σ_{i<j} J_ij (J⊥ (s^x s^x + s^y s^y) + Δ s^z s^z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub j: f64,
    pub delta: f64,
    /// Interaction range exponent β in `1/r^β`.
    pub range_exponent: f64,
    pub spacing: f64,
    /// Transverse coefficient; 1 for the XXZ model, 0 for the pure Ising test case.
    pub j_perp: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            j: 1.0,
            delta: -1.0,
            range_exponent: 3.0,
            spacing: 1.0,
            j_perp: 1.0,
        }
    }
}

impl ModelParams {
    pub fn xxz(delta: f64) -> Self {
        ModelParams {
            delta,
            ..Default::default()
        }
    }

    /// Pure Ising Hamiltonian used by the exactness checks.
    pub fn ising(delta: f64) -> Self {
        ModelParams {
            delta,
            j_perp: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j > 0.0) {
            return Err(Error::InvalidParameter(format!("J must be positive, got {}", self.j)));
        }
        if !(self.range_exponent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "range exponent must be positive, got {}",
                self.range_exponent
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lattice spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !self.delta.is_finite() || !self.j_perp.is_finite() {
            return Err(Error::InvalidParameter("Δ and J⊥ must be finite".into()));
        }
        Ok(())
    }
}

/// One disorder realization of the diluted `L × L` lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeRealization {
    #[serde(rename = "L")]
    pub size: usize,
    #[serde(rename = "p")]
    pub vacancy: f64,
    pub seed: u64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Resampling attempts used (1 when the first draw was non-empty).
    #[serde(default = "one")]
    pub attempts: u32,
    /// Occupied `(row, col)` sites in row-major order.
    pub sites: Vec<(u32, u32)>,
}

fn one() -> u32 {
    1
}

impl LatticeRealization {
    pub fn n_spins(&self) -> usize {
        self.sites.len()
    }

    pub fn occupation(&self) -> f64 {
        1.0 - self.vacancy
    }

    /// Expected number of spins `fL²`.
    pub fn expected_spins(&self) -> f64 {
        self.occupation() * (self.size * self.size) as f64
    }

    /// Build a realization from explicit coordinates (used by tests and
    /// hand-made geometries).
    pub fn from_sites(size: usize, sites: Vec<(u32, u32)>, boundary: Boundary) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(r, c) in &sites {
            if r as usize >= size || c as usize >= size {
                return Err(Error::InvalidParameter(format!(
                    "site ({r}, {c}) outside a lattice of side {size}"
                )));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidParameter(format!("duplicate site ({r}, {c})")));
            }
        }
        if sites.is_empty() {
            return Err(Error::InvalidParameter("a realization needs at least one site".into()));
        }
        Ok(LatticeRealization {
            size,
            vacancy: 1.0 - sites.len() as f64 / (size * size) as f64,
            seed: 0,
            boundary,
            attempts: 1,
            sites,
        })
    }

    /// Displacement between sites `a` and `b` in lattice units, honoring the
    /// boundary condition.
    pub fn displacement(&self, a: usize, b: usize) -> (f64, f64) {
        let (ra, ca) = self.sites[a];
        let (rb, cb) = self.sites[b];
        let mut dr = (ra as i64 - rb as i64).abs();
        let mut dc = (ca as i64 - cb as i64).abs();
        if self.boundary == Boundary::Periodic {
            let l = self.size as i64;
            dr = dr.min(l - dr);
            dc = dc.min(l - dc);
        }
        (dr as f64, dc as f64)
    }

    pub fn distance(&self, a: usize, b: usize, spacing: f64) -> f64 {
        let (dr, dc) = self.displacement(a, b);
        spacing * (dr * dr + dc * dc).sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lat: LatticeRealization = serde_json::from_str(text)?;
        let check = LatticeRealization::from_sites(lat.size, lat.sites.clone(), lat.boundary)?;
        debug_assert_eq!(check.sites, lat.sites);
        Ok(lat)
    }
}

/// Sample a realization with open boundaries.
pub fn build_lattice(size: usize, vacancy: f64, seed: u64) -> Result<LatticeRealization> {
    build_lattice_with(size, vacancy, seed, Boundary::Open)
}

pub fn build_lattice_with(
    size: usize,
    vacancy: f64,
    seed_value: u64,
    boundary: Boundary,
) -> Result<LatticeRealization> {
    if size == 0 {
        return Err(Error::InvalidParameter("lattice side must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&vacancy) {
        return Err(Error::InvalidParameter(format!(
            "vacancy probability must lie in [0, 1], got {vacancy}"
        )));
    }
    let occupation = 1.0 - vacancy;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seed::rng(seed_value, &[seed::LATTICE, attempt as u64]);
        let mut sites = Vec::with_capacity((occupation * (size * size) as f64) as usize + 1);
        for r in 0..size as u32 {
            for c in 0..size as u32 {
                if rng.random::<f64>() < occupation {
                    sites.push((r, c));
                }
            }
        }
        if !sites.is_empty() {
            return Ok(LatticeRealization {
                size,
                vacancy,
                seed: seed_value,
                boundary,
                attempts: attempt + 1,
                sites,
            });
        }
    }
    Err(Error::EmptyLattice {
        size,
        vacancy,
        attempts: MAX_ATTEMPTS,
    })
}

/// Dense symmetric coupling matrix with zero diagonal, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTable {
    n: usize,
    values: Vec<f64>,
}

impl CouplingTable {
    /// Wrap an explicit matrix. It must be square, symmetric, finite and have
    /// a zero diagonal.
    pub fn from_matrix(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidParameter(format!(
                "coupling matrix has {} entries, expected {}",
                values.len(),
                n * n
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter("coupling diagonal must vanish".into()));
            }
            for j in 0..i {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if a != b || !a.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "coupling matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(CouplingTable { n, values })
    }

    /// Uniform all-to-all couplings `J_ij = j` for `i ≠ j`.
    pub fn all_to_all(n: usize, j: f64) -> Self {
        let mut values = vec![j; n * n];
        for i in 0..n {
            values[i * n + i] = 0.0;
        }
        CouplingTable { n, values }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copy with selected couplings zeroed (both `(i, j)` and `(j, i)`).
    pub fn with_zeroed(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && !keep(i.min(j), i.max(j)) {
                    values[i * self.n + j] = 0.0;
                }
            }
        }
        CouplingTable { n: self.n, values }
    }

    /// Row sums `J^eff_i = Σ_j J_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }
}

#[inline]
fn pair_coupling(lat: &LatticeRealization, params: &ModelParams, a: usize, b: usize) -> f64 {
    let r = lat.distance(a, b, params.spacing);
    params.j * r.powf(-params.range_exponent)
}

pub fn build_couplings(lat: &LatticeRealization, params: &ModelParams) -> Result<CouplingTable> {
    params.validate()?;
    let n = lat.n_spins();
    if n == 0 {
        return Err(Error::InvalidParameter("realization has no spins".into()));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pair_coupling(lat, params, i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(CouplingTable { n, values })
}

/// `J^eff_i` computed row by row without materializing the matrix; for the
/// largest lattices where `N²` doubles do not fit in memory.
pub fn streamed_effective_fields(lat: &LatticeRealization, params: &ModelParams) -> Vec<f64> {
    let n = lat.n_spins();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| pair_coupling(lat, params, i, j))
                .sum()
        })
        .collect()
}

/// Log-binned density of effective interaction strengths.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveFieldHistogram {
    /// Raw `J^eff_i` values that were binned.
    pub values: Vec<f64>,
    /// Bin edges, log-spaced; `edges.len() == density.len() + 1`.
    pub edges: Vec<f64>,
    /// Normalized so that `Σ density_k (edge_{k+1} - edge_k) = 1` over the
    /// positive values.
    pub density: Vec<f64>,
    /// Number of zero values (isolated spins) kept out of the log bins.
    pub underflow: usize,
}

pub const DEFAULT_BINS_PER_DECADE: usize = 64;

impl EffectiveFieldHistogram {
    pub fn from_values(values: Vec<f64>, bins_per_decade: usize) -> Result<Self> {
        if bins_per_decade == 0 {
            return Err(Error::InvalidParameter("bins_per_decade must be positive".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "J^eff values must be finite and nonnegative".into(),
            ));
        }
        let positive: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
        let underflow = values.len() - positive.len();
        if positive.is_empty() {
            return Ok(EffectiveFieldHistogram {
                values,
                edges: Vec::new(),
                density: Vec::new(),
                underflow,
            });
        }
        let bpd = bins_per_decade as f64;
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().copied().fold(0.0, f64::max);
        let k_lo = (lo.log10() * bpd).floor() as i64;
        let mut k_hi = (hi.log10() * bpd).ceil() as i64;
        if k_hi <= k_lo {
            k_hi = k_lo + 1;
        }
        let edges: Vec<f64> = (k_lo..=k_hi).map(|k| 10f64.powf(k as f64 / bpd)).collect();
        let nbins = edges.len() - 1;
        let mut counts = vec![0usize; nbins];
        for &v in &positive {
            let k = ((v.log10() * bpd).floor() as i64 - k_lo).clamp(0, nbins as i64 - 1) as usize;
            // Guard against log10 rounding at bin edges.
            let k = if v < edges[k] && k > 0 {
                k - 1
            } else if v >= edges[k + 1] && k + 1 < nbins {
                k + 1
            } else {
                k
            };
            counts[k] += 1;
        }
        let total = positive.len() as f64;
        let density = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, w)| c as f64 / (total * (w[1] - w[0])))
            .collect();
        Ok(EffectiveFieldHistogram {
            values,
            edges,
            density,
            underflow,
        })
    }

    /// Ratio of the largest to the smallest positive value.
    pub fn spread(&self) -> f64 {
        let pos = self.values.iter().copied().filter(|&v| v > 0.0);
        let (lo, hi) = pos.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi / lo
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    /// CSV with columns `bin_left,bin_right,density`. A comment line records
    /// the underflow count and provenance.
    pub fn write_csv(&self, path: &Path, header: &str) -> Result<()> {
        let mut out = Vec::new();
        writeln!(
            out,
            "# {header} underflow={} total={}",
            self.underflow,
            self.values.len()
        )
        .expect("write to Vec");
        writeln!(out, "bin_left,bin_right,density").expect("write to Vec");
        for (d, w) in self.density.iter().zip(self.edges.windows(2)) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", w[0], w[1], d).expect("write to Vec");
        }
        crate::io::write_atomic(path, &out)
    }
}

/// Histogram of one realization's `J^eff`.
pub fn effective_fields(ct: &CouplingTable) -> Result<EffectiveFieldHistogram> {
    EffectiveFieldHistogram::from_values(ct.row_sums(), DEFAULT_BINS_PER_DECADE)
}
