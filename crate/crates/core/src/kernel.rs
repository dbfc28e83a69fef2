//! The O(N²) coupling contraction at the heart of every trajectory step.
//!
//! All phase-space layouts in this crate store a batch as an `N × cols`
//! row-major block (spin-major, with components and trajectories inside a
//! row), so contracting with the coupling matrix is one matrix product.

use crate::lattice::CouplingTable;

pub trait CouplingKernel: Sync {
    fn n_spins(&self) -> usize;

    /// `dst[i, c] = Σ_j J_ij src[j, c]` for row-major `N × cols` blocks.
    fn apply(&self, src: &[f64], dst: &mut [f64], cols: usize);

    fn coupling(&self, i: usize, j: usize) -> f64;
}

impl CouplingKernel for CouplingTable {
    fn n_spins(&self) -> usize {
        CouplingTable::n_spins(self)
    }

    fn apply(&self, src: &[f64], dst: &mut [f64], cols: usize) {
        let n = CouplingTable::n_spins(self);
        assert_eq!(src.len(), n * cols);
        assert_eq!(dst.len(), n * cols);
        if n == 0 || cols == 0 {
            return;
        }
        // SAFETY: the asserts above pin every slice to the extents described
        // by the strides passed to dgemm, and `dst` does not alias the inputs.
        unsafe {
            matrixmultiply::dgemm(
                n,
                n,
                cols,
                1.0,
                self.as_slice().as_ptr(),
                n as isize,
                1,
                src.as_ptr(),
                cols as isize,
                1,
                0.0,
                dst.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
    }

    fn coupling(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Reference double loop, used to check the blocked product.
pub fn apply_naive(ct: &CouplingTable, src: &[f64], dst: &mut [f64], cols: usize) {
    let n = ct.n_spins();
    for i in 0..n {
        for c in 0..cols {
            let mut acc = 0.0;
            for j in 0..n {
                acc += ct.get(i, j) * src[j * cols + c];
            }
            dst[i * cols + c] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_couplings, build_lattice, ModelParams};
    use rand::{Rng, SeedableRng};

    #[test]
    fn blocked_product_matches_double_loop() {
        let lat = build_lattice(13, 0.3, 8).unwrap();
        let ct = build_couplings(&lat, &ModelParams::default()).unwrap();
        let n = ct.n_spins();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for cols in [1usize, 3, 7, 48] {
            let src: Vec<f64> = (0..n * cols).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut fast = vec![0.0; n * cols];
            let mut slow = vec![0.0; n * cols];
            ct.apply(&src, &mut fast, cols);
            apply_naive(&ct, &src, &mut slow, cols);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}
