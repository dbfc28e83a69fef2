//! Semiclassical simulation of spin squeezing in diluted power-law XXZ
//! lattices: disorder realizations, discrete and cluster truncated Wigner
//! dynamics, an exact small-system reference, disorder averaging, and the
//! exponent / phase-boundary analysis built on top.

pub mod analysis;
pub mod config;
pub mod ctwa;
pub mod dtwa;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod ode;
pub mod seed;

pub use error::{Error, Result};
pub use lattice::{build_couplings, build_lattice, Boundary, CouplingTable, LatticeRealization, ModelParams};
