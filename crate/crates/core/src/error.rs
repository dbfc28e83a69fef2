use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no occupied sites after {attempts} resampling attempts (L = {size}, p = {vacancy})")]
    EmptyLattice { size: usize, vacancy: f64, attempts: u32 },

    #[error("integration failed at t = {t}: step size {step:e} underflowed")]
    StepUnderflow { t: f64, step: f64 },

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("{failed} of {total} trajectories failed, above the 0.1% limit")]
    TooManyFailures { failed: usize, total: usize },

    #[error("Hilbert space of {n} spins exceeds the exact-evolution cap of {cap}")]
    DimensionOverflow { n: usize, cap: usize },

    #[error("time grids differ between realizations")]
    MismatchedGrids,

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
