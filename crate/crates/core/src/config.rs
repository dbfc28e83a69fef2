//! Run configuration: a TOML file with a published schema.
//!
//! Precedence is command-line flags over file values over defaults. Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::pipeline::AnalysisSettings;
use crate::dtwa::Method;
use crate::ensemble::{PointSpec, SweepPlan, TmaxPolicy};
use crate::error::{Error, Result};
use crate::exact::DEFAULT_CAP;
use crate::io;
use crate::lattice::{Boundary, ModelParams};
use crate::ode::IntegratorConfig;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "SPINSQUEEZE_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub j: f64,
    pub beta: f64,
    pub j_perp: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelParams::default();
        ModelSection {
            j: m.j,
            beta: m.range_exponent,
            j_perp: m.j_perp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub vacancy: Vec<f64>,
    pub delta: Vec<f64>,
    pub sizes: Vec<usize>,
    pub boundary: Boundary,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            vacancy: vec![0.0],
            delta: vec![-1.0],
            sizes: vec![8],
            boundary: Boundary::Open,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub realizations: usize,
    pub trajectories: usize,
    /// Multiplies both counts; results are clamped to at least 1 and 2.
    pub desk_scale: f64,
    pub method: Method,
    pub batch: usize,
    pub t_max_default: f64,
    pub t_max: Option<f64>,
    pub pilot_t_opt: Option<f64>,
    pub t_min: f64,
    pub samples_per_decade: usize,
    pub exact_cap: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            realizations: 10,
            trajectories: 6400,
            desk_scale: 1.0,
            method: Method::Dtwa,
            batch: 16,
            t_max_default: 500.0,
            t_max: None,
            pilot_t_opt: None,
            t_min: 0.05,
            samples_per_decade: 40,
            exact_cap: DEFAULT_CAP,
        }
    }
}

impl EnsembleSection {
    pub fn scaled_realizations(&self) -> usize {
        ((self.realizations as f64 * self.desk_scale).round() as usize).max(1)
    }

    pub fn scaled_trajectories(&self) -> usize {
        ((self.trajectories as f64 * self.desk_scale).round() as usize).max(2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::new(Vec::new());
        IntegratorSection {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: d.max_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub model: ModelSection,
    pub grid: GridSection,
    pub ensemble: EnsembleSection,
    pub integrator: IntegratorSection,
    pub analysis: AnalysisSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out_dir: None,
            workers: None,
            model: ModelSection::default(),
            grid: GridSection::default(),
            ensemble: EnsembleSection::default(),
            integrator: IntegratorSection::default(),
            analysis: AnalysisSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Output directory: explicit value, else the environment, else `results`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn model_params(&self, delta: f64) -> ModelParams {
        ModelParams {
            j: self.model.j,
            delta,
            range_exponent: self.model.beta,
            j_perp: self.model.j_perp,
            ..ModelParams::default()
        }
    }

    pub fn points(&self) -> Vec<PointSpec> {
        let mut out = Vec::new();
        for &delta in &self.grid.delta {
            for &p in &self.grid.vacancy {
                for &size in &self.grid.sizes {
                    out.push(PointSpec { p, delta, size });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.vacancy.is_empty() || self.grid.delta.is_empty() || self.grid.sizes.is_empty() {
            return bad("grid.vacancy, grid.delta and grid.sizes must be non-empty".into());
        }
        if let Some(p) = self.grid.vacancy.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return bad(format!("grid.vacancy entries must lie in [0, 1), got {p}"));
        }
        if self.grid.sizes.contains(&0) {
            return bad("grid.sizes entries must be positive".into());
        }
        if self.ensemble.realizations == 0 {
            return bad("ensemble.realizations must be at least 1".into());
        }
        if self.ensemble.method != Method::Exact && self.ensemble.trajectories < 2 {
            return bad("ensemble.trajectories must be at least 2".into());
        }
        if !(self.ensemble.desk_scale > 0.0) {
            return bad("ensemble.desk_scale must be positive".into());
        }
        if self.ensemble.batch == 0 {
            return bad("ensemble.batch must be positive".into());
        }
        if self.ensemble.samples_per_decade == 0 || !(self.ensemble.t_min > 0.0) {
            return bad("ensemble.t_min and ensemble.samples_per_decade must be positive".into());
        }
        for (name, t) in [
            ("t_max_default", Some(self.ensemble.t_max_default)),
            ("t_max", self.ensemble.t_max),
            ("pilot_t_opt", self.ensemble.pilot_t_opt),
        ] {
            if let Some(t) = t {
                if !(t > self.ensemble.t_min) {
                    return bad(format!("ensemble.{name} must exceed ensemble.t_min, got {t}"));
                }
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        for &d in &self.grid.delta {
            self.model_params(d)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let a = &self.analysis;
        if !(a.n_ref > 0.0) || !(a.t_exclude >= 0.0) {
            return bad("analysis.n_ref must be positive and analysis.t_exclude non-negative".into());
        }
        self.plan().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn plan(&self) -> SweepPlan {
        SweepPlan {
            points: self.points(),
            model: self.model_params(0.0),
            boundary: self.grid.boundary,
            method: self.ensemble.method,
            n_realizations: self.ensemble.scaled_realizations(),
            n_traj: self.ensemble.scaled_trajectories(),
            tmax: TmaxPolicy {
                default: self.ensemble.t_max_default,
                pilot_t_opt: self.ensemble.pilot_t_opt,
                override_t_max: self.ensemble.t_max,
            },
            rel_tol: self.integrator.rel_tol,
            abs_tol: self.integrator.abs_tol,
            max_step: self.integrator.max_step,
            t_min: self.ensemble.t_min,
            samples_per_decade: self.ensemble.samples_per_decade,
            batch_width: self.ensemble.batch,
            exact_cap: self.ensemble.exact_cap,
            master_seed: self.seed,
        }
    }

    /// Hash of everything that affects results; excludes the output path
    /// and the worker count.
    pub fn hash(&self) -> String {
        let key = RunConfig {
            out_dir: None,
            workers: None,
            ..self.clone()
        };
        io::config_hash(&key)
    }
}

/// Machine-readable description of the configuration file.
pub fn config_schema() -> Value {
    let d = RunConfig::default();
    json!({
        "format": "TOML; unknown keys are rejected; command-line flags override file values",
        "keys": {
            "seed": {"type": "u64", "default": d.seed, "doc": "master seed; every random draw derives from it"},
            "out_dir": {"type": "path", "default": null, "doc": format!("output root; falls back to ${OUT_DIR_ENV}, then ./results")},
            "workers": {"type": "usize", "default": null, "doc": "worker threads; results do not depend on it"},
            "model.j": {"type": "f64", "default": d.model.j, "doc": "nearest-neighbour coupling J > 0"},
            "model.beta": {"type": "f64", "default": d.model.beta, "doc": "interaction range exponent, J_ij = J / r^beta"},
            "model.j_perp": {"type": "f64", "default": d.model.j_perp, "doc": "flip-flop prefactor; 0 gives the Ising test model"},
            "grid.vacancy": {"type": "[f64]", "default": d.grid.vacancy, "doc": "vacancy probabilities p in [0, 1)"},
            "grid.delta": {"type": "[f64]", "default": d.grid.delta, "doc": "anisotropies"},
            "grid.sizes": {"type": "[usize]", "default": d.grid.sizes, "doc": "lattice sides L"},
            "grid.boundary": {"type": "\"open\" | \"periodic\"", "default": "open", "doc": "distance convention"},
            "ensemble.realizations": {"type": "usize", "default": d.ensemble.realizations, "doc": "disorder realizations per point"},
            "ensemble.trajectories": {"type": "usize", "default": d.ensemble.trajectories, "doc": "trajectories per realization"},
            "ensemble.desk_scale": {"type": "f64", "default": d.ensemble.desk_scale, "doc": "scales both counts"},
            "ensemble.method": {"type": "\"dtwa\" | \"ctwa\" | \"exact\"", "default": "dtwa", "doc": "dynamics"},
            "ensemble.batch": {"type": "usize", "default": d.ensemble.batch, "doc": "trajectories integrated together"},
            "ensemble.t_max_default": {"type": "f64", "default": d.ensemble.t_max_default, "doc": "horizon without pilot information (1/J)"},
            "ensemble.t_max": {"type": "f64", "default": null, "doc": "explicit horizon; warns if below 10 x pilot_t_opt"},
            "ensemble.pilot_t_opt": {"type": "f64", "default": null, "doc": "largest-L t_opt from a pilot; horizon becomes 10x"},
            "ensemble.t_min": {"type": "f64", "default": d.ensemble.t_min, "doc": "first nonzero sample time"},
            "ensemble.samples_per_decade": {"type": "usize", "default": d.ensemble.samples_per_decade, "doc": "geometric sample density"},
            "ensemble.exact_cap": {"type": "usize", "default": d.ensemble.exact_cap, "doc": "largest N for exact dynamics"},
            "integrator.rel_tol": {"type": "f64", "default": d.integrator.rel_tol, "doc": "relative tolerance"},
            "integrator.abs_tol": {"type": "f64", "default": d.integrator.abs_tol, "doc": "absolute tolerance"},
            "integrator.max_step": {"type": "f64", "default": d.integrator.max_step, "doc": "largest step (1/J)"},
            "analysis.t_exclude": {"type": "f64", "default": d.analysis.t_exclude, "doc": "minima earlier than this are not scalable candidates"},
            "analysis.nu_threshold": {"type": "f64", "default": d.analysis.nu_threshold, "doc": "boundary threshold on nu"},
            "analysis.alpha_threshold": {"type": "f64", "default": d.analysis.alpha_threshold, "doc": "boundary threshold on alpha"},
            "analysis.n_ref": {"type": "f64", "default": d.analysis.n_ref, "doc": "reference N for the gamma fit"},
            "analysis.p_c": {"type": "f64", "default": null, "doc": "critical vacancy for t_opt scaling; from the nu boundary when absent"}
        }
    })
}
