//! Everything downstream of the time series: squeezing minima, late-time
//! magnetization, exponent fits, phase boundaries and t_opt scaling.

pub mod boundary;
pub mod fit;
pub mod magnetization;
pub mod minima;
pub mod pipeline;
pub mod schema;
pub mod topt;

pub use boundary::{assemble_phase_diagram, extract_pc, BoundaryEstimate, BoundaryKind, OrderedSide, PhasePoint};
pub use fit::{fit_power_law, ScalingFit};
pub use magnetization::{extract_mbar, LateTimeMagnetization};
pub use minima::{extract_xi_opt, fit_nu, MinimumClass, SqueezingExtract};
pub use topt::{fit_topt_scaling, fit_topt_vs_delta, ToptPoint, ToptScaling};

use crate::dtwa::{flags, ObservableSeries};
use crate::ensemble::{obs, EnsembleResult};
use crate::error::{Error, Result};

/// A scalar observable over time with standard errors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub err: Vec<f64>,
    /// False where ξ² is flagged unreliable.
    pub reliable: Vec<bool>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Disorder-averaged observable `o` (see [`crate::ensemble::OBSERVABLES`]).
    pub fn from_ensemble(res: &EnsembleResult, o: usize) -> Self {
        let (y, err) = res.column(o);
        Series {
            t: res.times(),
            y,
            err,
            reliable: res.rows.iter().map(|r| r.flags & flags::XI2_UNRELIABLE == 0).collect(),
        }
    }

    pub fn xi2(res: &EnsembleResult) -> Self {
        Self::from_ensemble(res, obs::XI2)
    }

    pub fn mxy(res: &EnsembleResult) -> Self {
        let mut s = Self::from_ensemble(res, obs::MXY);
        s.reliable = vec![true; s.len()];
        s
    }

    pub fn xi2_of(series: &ObservableSeries) -> Self {
        Series {
            t: series.rows.iter().map(|r| r.t).collect(),
            y: series.rows.iter().map(|r| r.xi2).collect(),
            err: series.rows.iter().map(|r| r.xi2_err).collect(),
            reliable: series.rows.iter().map(|r| r.reliable()).collect(),
        }
    }
}

/// `1 - λ e^{-λ}`: probability that a site does not hold exactly one defect
/// when defects per site are Poisson with mean λ.
pub fn poisson_effective_vacancy(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "λ must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(1.0 - lambda * (-lambda).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_values() {
        assert!((poisson_effective_vacancy(1.0).unwrap() - 0.632).abs() < 5e-4);
        assert!((poisson_effective_vacancy(1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(poisson_effective_vacancy(0.0).unwrap(), 1.0);
        assert!((poisson_effective_vacancy(2.0).unwrap() - 0.729).abs() < 5e-4);
        assert!(poisson_effective_vacancy(-0.1).is_err());
    }
}
