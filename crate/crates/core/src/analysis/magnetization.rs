//! Late-time plateau of the in-plane magnetization with a convergence gate.

use serde::{Deserialize, Serialize};

use super::Series;
use crate::error::{Error, Result};

/// Largest tolerated projected change of the plateau over one window.
pub const MAX_PROJECTED_CHANGE: f64 = 0.0025;
/// Largest tolerated `|m1 - m2| / σ` between the last two windows.
pub const MAX_WINDOW_SHIFT: f64 = 2.0;
const MIN_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LateTimeMagnetization {
    pub mbar: f64,
    /// Mean of the per-sample errors over the window.
    pub err: f64,
    pub m1: f64,
    pub m2: f64,
    pub sigma: f64,
    pub projected_change: f64,
    pub window: usize,
    pub converged: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Plateau over the final 10% of samples; converged when the last two 10%
/// windows agree within 2σ and the linear trend over the last window would
/// move the plateau by less than 0.0025 over one more window.
pub fn extract_mbar(s: &Series) -> Result<LateTimeMagnetization> {
    let n = s.len();
    let w = (0.1 * n as f64).round() as usize;
    if w < MIN_WINDOW {
        return Err(Error::Analysis(format!(
            "magnetization window of {w} samples is shorter than {MIN_WINDOW}"
        )));
    }
    let last = n - w..n;
    let prev = n - 2 * w..n - w;
    let mbar = mean(&s.y[last.clone()]);
    let err = mean(&s.err[last.clone()]);
    let m1 = mean(&s.y[prev.clone()]);
    let m2 = mbar;
    let sigma = mean(&s.err[prev.start..n]);
    let shift_ok = if sigma > 0.0 {
        (m1 - m2).abs() / sigma < MAX_WINDOW_SHIFT
    } else {
        m1 == m2
    };

    let ts = &s.t[last.clone()];
    let ys = &s.y[last];
    let (tm, ym) = (mean(ts), mean(ys));
    let sxx: f64 = ts.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let duration = ts[ts.len() - 1] - ts[0];
    let projected_change = (slope * duration).abs();

    Ok(LateTimeMagnetization {
        mbar,
        err,
        m1,
        m2,
        sigma,
        projected_change,
        window: w,
        converged: shift_ok && projected_change < MAX_PROJECTED_CHANGE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tail(n: usize, f: impl Fn(usize) -> f64, err: f64) -> Series {
        Series {
            t: (0..n).map(|k| k as f64).collect(),
            y: (0..n).map(f).collect(),
            err: vec![err; n],
            reliable: vec![true; n],
        }
    }

    #[test]
    fn constant_tail() {
        let m = extract_mbar(&tail(200, |_| 0.42, 0.0)).unwrap();
        assert!((m.mbar - 0.42).abs() < 1e-15);
        assert_eq!(m.projected_change, 0.0);
        assert!(m.converged);
    }

    #[test]
    fn window_is_last_tenth() {
        let m = extract_mbar(&tail(1000, |k| if k >= 900 { 1.0 } else { 0.0 }, 0.1)).unwrap();
        assert_eq!(m.window, 100);
        assert_eq!(m.mbar, 1.0);
        assert_eq!(m.m1, 0.0);
    }

    #[test]
    fn ramp_is_not_converged() {
        // 100 samples, window of 10 spanning 9 time units: slope 0.01/9 per unit.
        let slope = 0.01 / 9.0;
        let m = extract_mbar(&tail(100, |k| 0.5 + slope * k as f64, 1.0)).unwrap();
        assert!((m.projected_change - 0.01).abs() < 1e-12);
        assert!(!m.converged);
    }

    #[test]
    fn plateau_shift_of_one_sigma_passes() {
        let m = extract_mbar(&tail(100, |k| if k >= 90 { 0.31 } else { 0.30 }, 0.01)).unwrap();
        assert!(((m.m1 - m.m2).abs() / m.sigma - 1.0).abs() < 1e-9);
        assert!(m.converged);
    }

    #[test]
    fn short_series_rejected() {
        assert!(extract_mbar(&tail(40, |_| 1.0, 0.1)).is_err());
    }
}
