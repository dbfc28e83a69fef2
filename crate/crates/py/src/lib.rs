//! Python bindings: lattices, couplings, trajectory ensembles, the exact
//! reference, sweeps and the analysis helpers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spinsqueeze::analysis::boundary::{extract_pc, BoundaryKind, OrderedSide};
use spinsqueeze::analysis::fit::fit_power_law as fit_power_law_rs;
use spinsqueeze::config::RunConfig;
use spinsqueeze::ctwa::{pair_spins, run_ctwa_ensemble};
use spinsqueeze::dtwa::{run_ensemble, squeezing_from_moments, EnsembleOptions, Method, ObservableSeries};
use spinsqueeze::ensemble::run_sweep;
use spinsqueeze::exact::{evolve_exact, DEFAULT_CAP};
use spinsqueeze::lattice::{build_couplings, build_lattice_with, Boundary, LatticeRealization, ModelParams};
use spinsqueeze::ode::{geometric_grid, IntegratorConfig};
use spinsqueeze::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::EmptyLattice { .. }
        | Error::DimensionOverflow { .. }
        | Error::Config(_)
        | Error::MismatchedGrids => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_boundary(s: &str) -> PyResult<Boundary> {
    match s {
        "open" => Ok(Boundary::Open),
        "periodic" => Ok(Boundary::Periodic),
        _ => Err(PyValueError::new_err(format!(
            "boundary must be 'open' or 'periodic', got {s:?}"
        ))),
    }
}

/// One disorder realization of the diluted square lattice.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice {
    inner: LatticeRealization,
}

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (size, vacancy, seed, boundary = "open"))]
    fn new(size: usize, vacancy: f64, seed: u64, boundary: &str) -> PyResult<Self> {
        let inner = build_lattice_with(size, vacancy, seed, parse_boundary(boundary)?).map_err(py_err)?;
        Ok(PyLattice { inner })
    }

    /// Lattice from explicit `(row, col)` sites.
    #[staticmethod]
    #[pyo3(signature = (size, sites, boundary = "open"))]
    fn from_sites(size: usize, sites: Vec<(u32, u32)>, boundary: &str) -> PyResult<Self> {
        let inner = LatticeRealization::from_sites(size, sites, parse_boundary(boundary)?).map_err(py_err)?;
        Ok(PyLattice { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLattice {
            inner: LatticeRealization::from_json(text).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn n_spins(&self) -> usize {
        self.inner.n_spins()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size
    }

    #[getter]
    fn vacancy(&self) -> f64 {
        self.inner.vacancy
    }

    #[getter]
    fn sites(&self) -> Vec<(u32, u32)> {
        self.inner.sites.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.n_spins()
    }

    fn __repr__(&self) -> String {
        format!(
            "Lattice(size={}, vacancy={}, seed={}, n_spins={})",
            self.inner.size,
            self.inner.vacancy,
            self.inner.seed,
            self.inner.n_spins()
        )
    }
}

/// Parameters of the XXZ Hamiltonian.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (delta = -1.0, j = 1.0, beta = 3.0, j_perp = 1.0))]
    fn new(delta: f64, j: f64, beta: f64, j_perp: f64) -> PyResult<Self> {
        let inner = ModelParams {
            j,
            delta,
            range_exponent: beta,
            j_perp,
            ..Default::default()
        };
        inner.validate().map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn j_perp(&self) -> f64 {
        self.inner.j_perp
    }

    fn __repr__(&self) -> String {
        let m = &self.inner;
        format!(
            "Model(delta={}, j={}, beta={}, j_perp={})",
            m.delta, m.j, m.range_exponent, m.j_perp
        )
    }
}

/// Row-major `N × N` coupling matrix.
#[pyfunction]
fn couplings(lattice: &PyLattice, model: &PyModel) -> PyResult<Vec<Vec<f64>>> {
    let ct = build_couplings(&lattice.inner, &model.inner).map_err(py_err)?;
    Ok((0..ct.n_spins()).map(|i| ct.row(i).to_vec()).collect())
}

/// Per-spin summed couplings `J^eff_i`.
#[pyfunction]
fn jeff(lattice: &PyLattice, model: &PyModel) -> PyResult<Vec<f64>> {
    let ct = build_couplings(&lattice.inner, &model.inner).map_err(py_err)?;
    Ok(ct.row_sums())
}

/// Sample grid: `t = 0` then geometric spacing up to `t_max`.
#[pyfunction]
#[pyo3(signature = (t_max, t_min = 0.05, per_decade = 40))]
fn time_grid(t_max: f64, t_min: f64, per_decade: usize) -> Vec<f64> {
    geometric_grid(t_min, t_max, per_decade)
}

fn columns(s: &ObservableSeries) -> BTreeMap<&'static str, Vec<f64>> {
    let mut out = BTreeMap::new();
    let col = |f: fn(&spinsqueeze::dtwa::SeriesRow) -> f64| s.rows.iter().map(f).collect::<Vec<f64>>();
    out.insert("t", col(|r| r.t));
    out.insert("Sx", col(|r| r.sx));
    out.insert("Sy", col(|r| r.sy));
    out.insert("Sz", col(|r| r.sz));
    out.insert("Sx_err", col(|r| r.sx_err));
    out.insert("xi2", col(|r| r.xi2));
    out.insert("xi2_err", col(|r| r.xi2_err));
    out.insert("mxy", col(|r| r.mxy));
    out.insert("mxy_err", col(|r| r.mxy_err));
    out.insert("reliable", col(|r| if r.reliable() { 1.0 } else { 0.0 }));
    out
}

/// Collective observables of one realization, as a dict of columns.
///
/// `method` is "dtwa", "ctwa" or "exact"; trajectory counts are ignored for
/// the exact reference.
#[pyfunction]
#[pyo3(signature = (lattice, model, times, method = "dtwa", n_traj = 1024, seed = 1, rel_tol = 1e-10, abs_tol = 1e-12))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    py: Python<'_>,
    lattice: &PyLattice,
    model: &PyModel,
    times: Vec<f64>,
    method: &str,
    n_traj: usize,
    seed: u64,
    rel_tol: f64,
    abs_tol: f64,
) -> PyResult<BTreeMap<&'static str, Vec<f64>>> {
    let ct = build_couplings(&lattice.inner, &model.inner).map_err(py_err)?;
    let params = model.inner;
    let n = ct.n_spins();
    let icfg = IntegratorConfig::new(times).with_tolerances(rel_tol, abs_tol);
    let opts = EnsembleOptions::default();
    let series = py.detach(|| -> spinsqueeze::Result<ObservableSeries> {
        match method {
            "dtwa" => {
                let run = run_ensemble(&ct, &params, &icfg, n_traj, seed, &opts)?;
                Ok(squeezing_from_moments(&run.acc, n, Method::Dtwa))
            }
            "ctwa" => {
                let run = run_ctwa_ensemble(&ct, &pair_spins(&ct), &params, &icfg, n_traj, seed, &opts)?;
                Ok(squeezing_from_moments(&run.acc, n, Method::Ctwa))
            }
            "exact" => {
                icfg.validate()?;
                evolve_exact(&ct, &params, &icfg.sample_times, DEFAULT_CAP)
            }
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    });
    Ok(columns(&series.map_err(py_err)?))
}

/// Run (or resume) the sweep described by a TOML configuration string.
/// Returns the number of realizations computed in this call.
#[pyfunction]
fn run_config(py: Python<'_>, toml: &str, out_dir: PathBuf) -> PyResult<usize> {
    let cfg = RunConfig::from_toml(toml).map_err(py_err)?;
    cfg.validate().map_err(py_err)?;
    let outcome = py
        .detach(|| run_sweep(&cfg.plan(), &out_dir, &cfg.hash()))
        .map_err(py_err)?;
    if !outcome.complete() {
        return Err(PyRuntimeError::new_err("sweep finished with missing realizations"));
    }
    Ok(outcome.computed())
}

/// Weighted fit of `y = c x^s`; returns `(s, s_err, ln c, ln c_err)` or None
/// with fewer than three points.
#[pyfunction]
fn fit_power_law(xs: Vec<f64>, ys: Vec<f64>, errs: Vec<f64>) -> PyResult<Option<(f64, f64, f64, f64)>> {
    let fit = fit_power_law_rs(&xs, &ys, &errs).map_err(py_err)?;
    Ok(fit.map(|f| (f.slope, f.slope_err, f.intercept, f.intercept_err)))
}

/// Boundary along one exponent row of `(p, y, dy)` points; `ordered` is
/// "above" when the ordered phase has `y` above the threshold.
#[pyfunction]
#[pyo3(signature = (row, threshold, ordered = "above"))]
fn critical_vacancy(row: Vec<(f64, f64, f64)>, threshold: f64, ordered: &str) -> PyResult<(String, f64, f64)> {
    let side = match ordered {
        "above" => OrderedSide::Above,
        "below" => OrderedSide::Below,
        _ => return Err(PyValueError::new_err("ordered must be 'above' or 'below'")),
    };
    let b = extract_pc(&row, threshold, side).map_err(py_err)?;
    let kind = match b.kind {
        BoundaryKind::Crossing => "crossing",
        BoundaryKind::LowerBound => "lower-bound",
        BoundaryKind::UpperBound => "upper-bound",
    };
    Ok((kind.to_string(), b.p_c, b.dp_c))
}

#[pyfunction]
fn poisson_effective_vacancy(lam: f64) -> PyResult<f64> {
    spinsqueeze::analysis::poisson_effective_vacancy(lam).map_err(py_err)
}

#[pymodule]
fn pyspinsqueeze(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(couplings, m)?)?;
    m.add_function(wrap_pyfunction!(jeff, m)?)?;
    m.add_function(wrap_pyfunction!(time_grid, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(critical_vacancy, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_effective_vacancy, m)?)?;
    Ok(())
}
