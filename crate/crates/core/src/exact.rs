//! Exact quantum dynamics of small systems, used as reference truth.
//!
//! Basis state `k` has spin `i` up (`s^z = +1/2`) when bit `i` of `k` is set.
//! The Hamiltonian conserves `S^z`, so each magnetization sector is
//! diagonalized once and the x-polarized product state is propagated by its
//! exact spectral decomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dtwa::{observables_row, Method, Moments, ObservableSeries, PAIRS};
use crate::dynamics::Vec3;
use crate::error::{Error, Result};
use crate::lattice::{CouplingTable, ModelParams};

pub const DEFAULT_CAP: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// A pure state of `n` spin-1/2 particles.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub n: usize,
    pub amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|→→…→⟩`, the x-polarized product state.
    pub fn x_polarized(n: usize) -> Self {
        let dim = 1usize << n;
        let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
        QuantumState {
            n,
            amplitudes: vec![a; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `s^axis_site |self⟩`.
    pub fn apply_spin(&self, site: usize, axis: Axis) -> QuantumState {
        let bit = 1usize << site;
        let half = 0.5;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (k, &c) in self.amplitudes.iter().enumerate() {
            let up = k & bit != 0;
            match axis {
                Axis::X => out[k ^ bit] += c * half,
                // σ^y|↑⟩ = i|↓⟩, σ^y|↓⟩ = -i|↑⟩.
                Axis::Y => out[k ^ bit] += c * Complex64::new(0.0, if up { half } else { -half }),
                Axis::Z => out[k] += c * if up { half } else { -half },
            }
        }
        QuantumState {
            n: self.n,
            amplitudes: out,
        }
    }

    /// `S^axis |self⟩` for the collective spin.
    pub fn apply_collective(&self, axis: Axis) -> QuantumState {
        let mut acc = QuantumState {
            n: self.n,
            amplitudes: vec![Complex64::new(0.0, 0.0); self.amplitudes.len()],
        };
        for i in 0..self.n {
            let t = self.apply_spin(i, axis);
            acc.amplitudes.iter_mut().zip(&t.amplitudes).for_each(|(a, b)| *a += b);
        }
        acc
    }

    /// `⟨s^α_i⟩`.
    pub fn expect_spin(&self, site: usize, axis: Axis) -> f64 {
        self.inner(&self.apply_spin(site, axis)).re
    }

    /// `⟨s^α_i s^β_j⟩` for `i ≠ j`.
    pub fn expect_pair(&self, i: usize, a: Axis, j: usize, b: Axis) -> f64 {
        assert_ne!(i, j);
        self.inner(&self.apply_spin(j, b).apply_spin(i, a)).re
    }

    /// Collective means and symmetrized second moments.
    pub fn collective_moments(&self) -> Moments {
        let phi = Axis::ALL.map(|a| self.apply_collective(a));
        let mean: Vec3 = [0, 1, 2].map(|a| self.inner(&phi[a]).re);
        let mut m = Moments {
            mean,
            ..Default::default()
        };
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            // Re⟨ψ|S^a S^b|ψ⟩ = ⟨{S^a, S^b}⟩/2 for Hermitian S^a, S^b.
            m.second[k] = phi[a].inner(&phi[b]).re;
            m.cov[k] = m.second[k] - mean[a] * mean[b];
        }
        m
    }
}

fn check_size(n: usize, cap: usize) -> Result<()> {
    if n > cap || n >= usize::BITS as usize - 1 {
        return Err(Error::DimensionOverflow { n, cap });
    }
    Ok(())
}

fn diagonal_energy(k: usize, ct: &CouplingTable, delta: f64) -> f64 {
    let n = ct.n_spins();
    let mut e = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let aligned = ((k >> i) & 1) == ((k >> j) & 1);
            e -= ct.get(i, j) * delta * if aligned { 0.25 } else { -0.25 };
        }
    }
    e
}

/// `H v` on the full space for a real vector.
pub fn apply_hamiltonian(ct: &CouplingTable, params: &ModelParams, v: &[f64]) -> Vec<f64> {
    let n = ct.n_spins();
    let mut out = vec![0.0; v.len()];
    for (k, &c) in v.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        out[k] += diagonal_energy(k, ct, params.delta) * c;
        for i in 0..n {
            for j in (i + 1)..n {
                if ((k >> i) & 1) != ((k >> j) & 1) {
                    // s^x s^x + s^y s^y = (s^+ s^- + s^- s^+)/2 flips an antiparallel pair.
                    out[k ^ (1 << i) ^ (1 << j)] -= 0.5 * ct.get(i, j) * params.j_perp * c;
                }
            }
        }
    }
    out
}

/// One fixed-magnetization block: basis states, energies and eigenvectors.
struct Sector {
    states: Vec<usize>,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn sectors(ct: &CouplingTable, params: &ModelParams) -> Vec<Sector> {
    let n = ct.n_spins();
    let dim = 1usize << n;
    let mut by_count: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for k in 0..dim {
        by_count[k.count_ones() as usize].push(k);
    }
    by_count
        .into_iter()
        .map(|states| {
            let d = states.len();
            let index: std::collections::HashMap<usize, usize> =
                states.iter().enumerate().map(|(r, &k)| (k, r)).collect();
            let mut h = DMatrix::<f64>::zeros(d, d);
            for (r, &k) in states.iter().enumerate() {
                h[(r, r)] = diagonal_energy(k, ct, params.delta);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if ((k >> i) & 1) != ((k >> j) & 1) {
                            let c = index[&(k ^ (1 << i) ^ (1 << j))];
                            h[(c, r)] -= 0.5 * ct.get(i, j) * params.j_perp;
                        }
                    }
                }
            }
            let eig = SymmetricEigen::new(h);
            Sector {
                states,
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            }
        })
        .collect()
}

/// Exact propagator for the x-polarized initial state.
pub struct ExactEvolution {
    n: usize,
    sectors: Vec<Sector>,
    /// Initial-state overlaps with each sector eigenvector.
    overlaps: Vec<Vec<f64>>,
}

impl ExactEvolution {
    pub fn new(ct: &CouplingTable, params: &ModelParams, cap: usize) -> Result<Self> {
        let n = ct.n_spins();
        check_size(n, cap)?;
        params.validate()?;
        let sectors = sectors(ct, params);
        let amp = ((1usize << n) as f64).sqrt().recip();
        let overlaps = sectors
            .iter()
            .map(|s| s.vectors.column_iter().map(|v| amp * v.sum()).collect())
            .collect();
        Ok(ExactEvolution { n, sectors, overlaps })
    }

    pub fn state_at(&self, t: f64) -> QuantumState {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << self.n];
        for (s, ov) in self.sectors.iter().zip(&self.overlaps) {
            let coeffs: Vec<Complex64> = s
                .energies
                .iter()
                .zip(ov)
                .map(|(&e, &c)| Complex64::from_polar(c, -e * t))
                .collect();
            for (r, &k) in s.states.iter().enumerate() {
                let row = s.vectors.row(r);
                amps[k] = row.iter().zip(&coeffs).map(|(&v, &c)| c * v).sum();
            }
        }
        QuantumState {
            n: self.n,
            amplitudes: amps,
        }
    }

    /// `⟨H⟩`, constant in time.
    pub fn energy(&self) -> f64 {
        self.sectors
            .iter()
            .zip(&self.overlaps)
            .map(|(s, ov)| s.energies.iter().zip(ov).map(|(e, c)| e * c * c).sum::<f64>())
            .sum()
    }
}

/// Exact observable series on the sample grid, with zero standard errors.
pub fn evolve_exact(ct: &CouplingTable, params: &ModelParams, times: &[f64], cap: usize) -> Result<ObservableSeries> {
    let evo = ExactEvolution::new(ct, params, cap)?;
    let n = ct.n_spins();
    let rows = times
        .iter()
        .map(|&t| observables_row(t, &evo.state_at(t).collective_moments(), n))
        .collect();
    Ok(ObservableSeries {
        method: Method::Exact,
        n_spins: n,
        rows,
    })
}

/// Taylor coefficients `c_k` of `⟨S^x(t)⟩ = Σ_k c_k t^k` for `k ≤ order`.
///
/// `c_k = (i^k / k!) ⟨ad_H^k(S^x)⟩`, expanded as
/// `Σ_m C(k, m) (-1)^m ⟨H^{k-m} ψ| S^x |H^m ψ⟩`. Every term is real for the
/// real initial state, so odd orders vanish.
pub fn short_time_expansion(ct: &CouplingTable, params: &ModelParams, order: usize, cap: usize) -> Result<Vec<f64>> {
    let n = ct.n_spins();
    check_size(n, cap)?;
    let dim = 1usize << n;
    let psi = vec![((dim as f64).sqrt()).recip(); dim];
    let mut powers = vec![psi];
    for _ in 0..order {
        let next = apply_hamiltonian(ct, params, powers.last().unwrap());
        powers.push(next);
    }
    let sx = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (k, &c) in v.iter().enumerate() {
            for i in 0..n {
                out[k ^ (1 << i)] += 0.5 * c;
            }
        }
        out
    };
    let sx_powers: Vec<Vec<f64>> = powers.iter().map(|v| sx(v)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut factorial = 1.0;
    for k in 0..=order {
        if k > 0 {
            factorial *= k as f64;
        }
        if k % 2 == 1 {
            coeffs.push(0.0);
            continue;
        }
        let mut binom = 1.0;
        let mut sum = 0.0;
        for m in 0..=k {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sum += binom * sign * dot(&powers[k - m], &sx_powers[m]);
            binom = binom * (k - m) as f64 / (m + 1) as f64;
        }
        let i_k = if k % 4 == 0 { 1.0 } else { -1.0 };
        coeffs.push(i_k * sum / factorial);
    }
    Ok(coeffs)
}
