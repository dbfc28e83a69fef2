//! Weighted least squares for power laws `y = c x^s` in log-log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// At least this many points are needed for an exponent.
pub const MIN_POINTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// `s` in `y = c x^s`.
    pub slope: f64,
    pub slope_err: f64,
    /// `ln c`.
    pub intercept: f64,
    pub intercept_err: f64,
    /// Covariance of slope and intercept.
    pub covariance: f64,
    /// The abscissae that entered the fit.
    pub xs: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl ScalingFit {
    /// `-s`, the exponent of a decaying law `y ∼ x^{-exponent}`.
    pub fn decay_exponent(&self) -> f64 {
        -self.slope
    }

    /// Fitted `y(x)` and its standard error from the parameter covariance.
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let lx = x.ln();
        let ly = self.intercept + self.slope * lx;
        let var = self.intercept_err.powi(2) + lx * lx * self.slope_err.powi(2) + 2.0 * lx * self.covariance;
        let y = ly.exp();
        (y, y * var.max(0.0).sqrt())
    }
}

/// Gaussian-likelihood fit of `ln y = ln c + s ln x` with `σ_{ln y} = err/y`.
/// Returns `Ok(None)` with fewer than [`MIN_POINTS`] points.
pub fn fit_power_law(xs: &[f64], ys: &[f64], errs: &[f64]) -> Result<Option<ScalingFit>> {
    if xs.len() != ys.len() || xs.len() != errs.len() {
        return Err(Error::Analysis("fit inputs differ in length".into()));
    }
    for ((&x, &y), &e) in xs.iter().zip(ys).zip(errs) {
        if !(x > 0.0 && y > 0.0 && e > 0.0) || !(x.is_finite() && y.is_finite() && e.is_finite()) {
            return Err(Error::Analysis(format!(
                "power-law fit needs positive finite x, y and errors, got ({x}, {y} ± {e})"
            )));
        }
    }
    if xs.len() < MIN_POINTS {
        return Ok(None);
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &e) in xs.iter().zip(ys).zip(errs) {
        let (lx, ly) = (x.ln(), y.ln());
        let w = (y / e).powi(2);
        s += w;
        sx += w * lx;
        sy += w * ly;
        sxx += w * lx * lx;
        sxy += w * lx * ly;
    }
    let det = s * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::Analysis("degenerate abscissae in power-law fit".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = xs
        .iter()
        .zip(ys)
        .zip(errs)
        .map(|((&x, &y), &e)| ((y.ln() - intercept - slope * x.ln()) * y / e).powi(2))
        .sum();
    Ok(Some(ScalingFit {
        slope,
        slope_err: (s / det).sqrt(),
        intercept,
        intercept_err: (sxx / det).sqrt(),
        covariance: -sx / det,
        xs: xs.to_vec(),
        chi2,
        dof: xs.len() - 2,
    }))
}
