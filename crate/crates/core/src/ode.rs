//! Adaptive Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The state may hold a batch of independent trajectories interleaved with
//! the trajectory index innermost (`index % width`). Step control uses the
//! worst per-trajectory RMS error so every member meets the tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autonomous system `dy/dt = f(y)`.
pub trait OdeSystem {
    fn len(&self) -> usize;

    /// Number of interleaved trajectories in the state.
    fn batch_width(&self) -> usize {
        1
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step, in units of 1/J.
    pub max_step: f64,
    pub max_steps: usize,
    /// Strictly increasing output grid with `sample_times[0] >= 0`.
    pub sample_times: Vec<f64>,
}

impl IntegratorConfig {
    pub fn new(sample_times: Vec<f64>) -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            max_steps: 50_000_000,
            sample_times,
        }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("max_step must be positive".into()));
        }
        match self.sample_times.first() {
            None => return Err(Error::InvalidParameter("sample grid is empty".into())),
            Some(&t0) if !(t0 >= 0.0) => {
                return Err(Error::InvalidParameter("sample times must start at t >= 0".into()))
            }
            _ => {}
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "sample times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// `t = 0` followed by a geometric grid from `t_min` to `t_max` with
/// `per_decade` points per decade; `t_max` is always the last sample.
pub fn geometric_grid(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    if t_max <= 0.0 {
        return grid;
    }
    if t_max <= t_min {
        grid.push(t_max);
        return grid;
    }
    let decades = (t_max / t_min).log10();
    let intervals = ((decades * per_decade as f64).ceil() as usize).max(1);
    for k in 0..intervals {
        grid.push(t_min * (t_max / t_min).powf(k as f64 / intervals as f64));
    }
    grid.push(t_max);
    grid
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince tableau. The flow is autonomous, so the nodes c_i are unused.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer & Wanner, DOPRI5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrate from `y0` at `t = 0`, calling `observe(k, y)` with the state at
/// every `sample_times[k]`.
pub fn integrate<S, F>(sys: &mut S, y0: &[f64], cfg: &IntegratorConfig, mut observe: F) -> Result<StepStats>
where
    S: OdeSystem,
    F: FnMut(usize, &[f64]),
{
    cfg.validate()?;
    let n = sys.len();
    assert_eq!(y0.len(), n, "state length does not match the system");
    let width = sys.batch_width().max(1);
    let times = &cfg.sample_times;
    let t_end = *times.last().expect("validated non-empty");

    let mut stats = StepStats::default();
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        observe(next, y0);
        next += 1;
    }
    if next == times.len() {
        return Ok(stats);
    }

    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut interp = vec![0.0; n];
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut cont: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    let mut sums = vec![0.0; width];

    sys.rhs(&y, &mut k[0]);
    stats.evaluations += 1;

    let mut h = initial_step(&y, &k[0], cfg, width, &mut sums)
        .min(cfg.max_step)
        .min(t_end);
    let mut t = 0.0;
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::TooManySteps(cfg.max_steps));
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, step: h });
        }

        stage(&mut tmp, &y, h, &k, &[A21]);
        sys.rhs(&tmp, &mut k[1]);
        stage(&mut tmp, &y, h, &k, &[A31, A32]);
        sys.rhs(&tmp, &mut k[2]);
        stage(&mut tmp, &y, h, &k, &[A41, A42, A43]);
        sys.rhs(&tmp, &mut k[3]);
        stage(&mut tmp, &y, h, &k, &[A51, A52, A53, A54]);
        sys.rhs(&tmp, &mut k[4]);
        stage(&mut tmp, &y, h, &k, &[A61, A62, A63, A64, A65]);
        sys.rhs(&tmp, &mut k[5]);
        stage(&mut y_new, &y, h, &k, &[A71, 0.0, A73, A74, A75, A76]);
        {
            let (head, tail) = k.split_at_mut(6);
            sys.rhs(&y_new, &mut tail[0]);
            let k7 = &tail[0];
            for i in 0..n {
                err[i] = h
                    * (E1 * head[0][i]
                        + E3 * head[2][i]
                        + E4 * head[3][i]
                        + E5 * head[4][i]
                        + E6 * head[5][i]
                        + E7 * k7[i]);
            }
        }
        stats.evaluations += 6;

        let e = error_norm(&err, &y, &y_new, cfg, width, &mut sums);
        if e <= 1.0 {
            stats.accepted += 1;
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k[0][i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k[6][i] - bspl;
                cont[4][i] =
                    h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            }
            let t_new = if t + h >= t_end { t_end } else { t + h };
            while next < times.len() && times[next] <= t_new {
                if times[next] == t_new {
                    observe(next, &y_new);
                } else {
                    let theta = (times[next] - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..n {
                        interp[i] = cont[0][i]
                            + theta * (cont[1][i] + theta1 * (cont[2][i] + theta * (cont[3][i] + theta1 * cont[4][i])));
                    }
                    observe(next, &interp);
                }
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            let mut fac = SAFETY * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(cfg.max_step);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (SAFETY * e.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(stats)
}

#[inline]
fn stage(out: &mut [f64], y: &[f64], h: f64, k: &[Vec<f64>; 7], a: &[f64]) {
    match a.len() {
        1 => {
            for i in 0..y.len() {
                out[i] = y[i] + h * a[0] * k[0][i];
            }
        }
        2 => {
            for i in 0..y.len() {
                out[i] = y[i] + h * (a[0] * k[0][i] + a[1] * k[1][i]);
            }
        }
        3 => {
            for i in 0..y.len() {
                out[i] = y[i] + h * (a[0] * k[0][i] + a[1] * k[1][i] + a[2] * k[2][i]);
            }
        }
        4 => {
            for i in 0..y.len() {
                out[i] = y[i] + h * (a[0] * k[0][i] + a[1] * k[1][i] + a[2] * k[2][i] + a[3] * k[3][i]);
            }
        }
        5 => {
            for i in 0..y.len() {
                out[i] =
                    y[i] + h * (a[0] * k[0][i] + a[1] * k[1][i] + a[2] * k[2][i] + a[3] * k[3][i] + a[4] * k[4][i]);
            }
        }
        _ => {
            for i in 0..y.len() {
                out[i] =
                    y[i] + h * (a[0] * k[0][i] + a[2] * k[2][i] + a[3] * k[3][i] + a[4] * k[4][i] + a[5] * k[5][i]);
            }
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], cfg: &IntegratorConfig, width: usize, sums: &mut [f64]) -> f64 {
    sums.iter_mut().for_each(|s| *s = 0.0);
    for i in 0..err.len() {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sk;
        sums[i % width] += r * r;
    }
    let per = (err.len() / width).max(1) as f64;
    let worst = sums.iter().fold(0.0f64, |m, &s| m.max(s));
    if worst.is_nan() {
        return f64::INFINITY;
    }
    (worst / per).sqrt()
}

fn initial_step(y: &[f64], f: &[f64], cfg: &IntegratorConfig, width: usize, sums: &mut [f64]) -> f64 {
    let d0 = error_norm(y, y, y, cfg, width, sums);
    let d1 = error_norm(f, y, y, cfg, width, sums);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Harmonic oscillator batch with distinct frequencies.
    struct Oscillators {
        omegas: Vec<f64>,
    }

    impl OdeSystem for Oscillators {
        fn len(&self) -> usize {
            2 * self.omegas.len()
        }
        fn batch_width(&self) -> usize {
            self.omegas.len()
        }
        fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
            let w = self.omegas.len();
            for (b, om) in self.omegas.iter().enumerate() {
                dy[b] = y[w + b];
                dy[w + b] = -om * om * y[b];
            }
        }
    }

    #[test]
    fn dense_output_tracks_exact_solution() {
        let mut sys = Oscillators { omegas: vec![1.0, 2.5] };
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.137).collect();
        let cfg = IntegratorConfig::new(times.clone()).with_tolerances(1e-10, 1e-12);
        let mut worst: f64 = 0.0;
        integrate(&mut sys, &[1.0, 1.0, 0.0, 0.0], &cfg, |k, y| {
            for (b, om) in [1.0f64, 2.5].iter().enumerate() {
                worst = worst.max((y[b] - (om * times[k]).cos()).abs());
            }
        })
        .unwrap();
        assert!(worst < 1e-8, "max error {worst}");
    }

    #[test]
    fn every_sample_is_observed_once_in_order() {
        let mut sys = Oscillators { omegas: vec![1.0] };
        let times = geometric_grid(0.05, 30.0, 40);
        let cfg = IntegratorConfig::new(times.clone());
        let mut seen = Vec::new();
        integrate(&mut sys, &[1.0, 0.0], &cfg, |k, _| seen.push(k)).unwrap();
        assert_eq!(seen, (0..times.len()).collect::<Vec<_>>());
    }

    #[test]
    fn geometric_grid_shape() {
        let g = geometric_grid(0.05, 500.0, 40);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 0.05);
        assert_eq!(*g.last().unwrap(), 500.0);
        assert_eq!(g.len(), 2 + 160);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_unsorted_grid() {
        let cfg = IntegratorConfig::new(vec![0.0, 2.0, 1.0]);
        assert!(cfg.validate().is_err());
    }

    struct Blowup;
    impl OdeSystem for Blowup {
        fn len(&self) -> usize {
            1
        }
        fn rhs(&mut self, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn finite_time_singularity_fails() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let cfg = IntegratorConfig::new(vec![0.0, 2.0]);
        let err = integrate(&mut Blowup, &[1.0], &cfg, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. } | Error::TooManySteps(_)));
    }
}
