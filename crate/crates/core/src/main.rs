use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use spinsqueeze::analysis::pipeline::{self, AnalysisSettings};
use spinsqueeze::analysis::{poisson_effective_vacancy, schema::output_schema};
use spinsqueeze::config::{config_schema, RunConfig};
use spinsqueeze::dtwa::{Method, ObservableSeries};
use spinsqueeze::ensemble::{load_results, run_sweep, simulate_realization};
use spinsqueeze::error::Error;
use spinsqueeze::io;
use spinsqueeze::lattice::{build_couplings, build_lattice_with, Boundary, EffectiveFieldHistogram};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "spinsqueeze",
    version,
    about = "Semiclassical spin-squeezing simulations of disordered dipolar XXZ lattices"
)]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// Print the configuration and output schema as JSON and exit.
    #[arg(long)]
    describe_schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the ensemble sweep described by the configuration.
    Simulate(SimulateArgs),
    /// Analyze an existing result tree.
    Analyze(AnalyzeArgs),
    /// Histogram of effective interaction strengths J^eff.
    HistJeff(HistArgs),
    /// Compare dTWA and cTWA against exact dynamics on a small system.
    Oracle(OracleArgs),
    /// Effective vacancy probability for a Poisson defect count with mean λ.
    Poisson {
        #[arg(allow_negative_numbers = true)]
        lambda: f64,
    },
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output root; overrides the file and the environment.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Vacancy probabilities p, comma-separated.
    #[arg(long, value_delimiter = ',')]
    vacancy: Option<Vec<f64>>,
    /// Anisotropies Δ, comma-separated; negative lists such as `-2,-1` are accepted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta: Option<Vec<f64>>,
    /// Lattice sides L, comma-separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Disorder realizations per point.
    #[arg(long)]
    realizations: Option<usize>,
    /// Trajectories per realization.
    #[arg(long)]
    trajectories: Option<usize>,
    /// Factor applied to realization and trajectory counts.
    #[arg(long)]
    desk_scale: Option<f64>,
    /// Explicit horizon in units of 1/J.
    #[arg(long)]
    t_max: Option<f64>,
    /// Largest-L t_opt from a pilot run; the horizon becomes ten times this.
    #[arg(long)]
    pilot_t_opt: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Squeezing,
    Magnetization,
    Topt,
    PhaseDiagram,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    mode: Mode,
    /// Result tree written by `simulate`; defaults to the configured output root.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Directory for the analysis tables; defaults to `<in>/analysis`.
    #[arg(long)]
    dest: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Minima earlier than this are never scalable candidates.
    #[arg(long)]
    t_exclude: Option<f64>,
    /// Threshold on ν for the squeezing boundary.
    #[arg(long)]
    nu_threshold: Option<f64>,
    /// Threshold on α for the magnetization boundary.
    #[arg(long)]
    alpha_threshold: Option<f64>,
    /// Reference size for the t_opt fit.
    #[arg(long)]
    n_ref: Option<f64>,
    /// Critical vacancy for the t_opt fit; defaults to the ν boundary.
    #[arg(long)]
    p_c: Option<f64>,
}

#[derive(Args, Debug)]
struct HistArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = spinsqueeze::lattice::DEFAULT_BINS_PER_DECADE)]
    bins_per_decade: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Dtwa,
    Ctwa,
    Exact,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::EmptyLattice { .. }
            | Error::DimensionOverflow { .. } => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn resolve(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut c = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.out {
        c.out_dir = Some(v.clone());
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.workers {
        c.workers = Some(v);
    }
    if let Some(v) = &args.vacancy {
        c.grid.vacancy = v.clone();
    }
    if let Some(v) = &args.delta {
        c.grid.delta = v.clone();
    }
    if let Some(v) = &args.sizes {
        c.grid.sizes = v.clone();
    }
    if let Some(v) = args.boundary {
        c.grid.boundary = match v {
            BoundaryArg::Open => Boundary::Open,
            BoundaryArg::Periodic => Boundary::Periodic,
        };
    }
    if let Some(v) = args.method {
        c.ensemble.method = match v {
            MethodArg::Dtwa => Method::Dtwa,
            MethodArg::Ctwa => Method::Ctwa,
            MethodArg::Exact => Method::Exact,
        };
    }
    if let Some(v) = args.realizations {
        c.ensemble.realizations = v;
    }
    if let Some(v) = args.trajectories {
        c.ensemble.trajectories = v;
    }
    if let Some(v) = args.desk_scale {
        c.ensemble.desk_scale = v;
    }
    if let Some(v) = args.t_max {
        c.ensemble.t_max = Some(v);
    }
    if let Some(v) = args.pilot_t_opt {
        c.ensemble.pilot_t_opt = Some(v);
    }
    if let Some(v) = args.rel_tol {
        c.integrator.rel_tol = v;
    }
    if let Some(v) = args.abs_tol {
        c.integrator.abs_tol = v;
    }
    c.validate()?;
    if let Some(w) = c.workers {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    Ok(c)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let cfg = resolve(&args.cfg)?;
    let out = cfg.resolved_out_dir();
    create_dir(&out)?;
    let hash = cfg.hash();
    let stored = RunConfig {
        out_dir: None,
        workers: None,
        ..cfg.clone()
    };
    let text = toml::to_string_pretty(&stored).map_err(|e| Error::Config(e.to_string()))?;
    io::write_atomic(&out.join("config.toml"), text.as_bytes())?;
    let plan = cfg.plan();
    info!(
        "{} points, {} realizations x {} trajectories, method {}",
        plan.points.len(),
        plan.n_realizations,
        plan.n_traj,
        plan.method.tag()
    );
    let outcome = run_sweep(&plan, &out, &hash)?;
    for p in &outcome.points {
        info!(
            "{}: {:?}, {} realizations computed",
            p.dir.display(),
            p.status,
            p.computed
        );
    }
    if outcome.complete() {
        emit(&format!("{}", out.display()));
        Ok(0)
    } else {
        let bad: Vec<String> = outcome
            .points
            .iter()
            .filter(|p| p.result.is_none() || p.status != spinsqueeze::ensemble::PointStatus::Complete)
            .map(|p| p.point.dir_name())
            .collect();
        warn!("incomplete points: {}", bad.join(", "));
        Ok(EXIT_PARTIAL)
    }
}

fn cmd_analyze(args: &AnalyzeArgs) -> CmdResult {
    let mut cfg = resolve(&args.cfg)?;
    let s = &mut cfg.analysis;
    if let Some(v) = args.t_exclude {
        s.t_exclude = v;
    }
    if let Some(v) = args.nu_threshold {
        s.nu_threshold = v;
    }
    if let Some(v) = args.alpha_threshold {
        s.alpha_threshold = v;
    }
    if let Some(v) = args.n_ref {
        s.n_ref = v;
    }
    if let Some(v) = args.p_c {
        s.p_c = Some(v);
    }
    cfg.validate()?;
    let settings: AnalysisSettings = cfg.analysis.clone();
    let input = args.input.clone().unwrap_or_else(|| cfg.resolved_out_dir());
    let dest = args.dest.clone().unwrap_or_else(|| input.join("analysis"));
    let results = load_results(&input)?;
    if results.is_empty() {
        return Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("{}: no completed points found", input.display()),
        });
    }
    let mut code = 0;
    if args.cfg.config.is_some() {
        let missing: Vec<String> = cfg
            .points()
            .iter()
            .filter(|pt| !results.iter().any(|(q, _)| q == *pt))
            .map(|pt| pt.dir_name())
            .collect();
        if !missing.is_empty() {
            warn!("missing points, analysis is partial: {}", missing.join(", "));
            code = EXIT_PARTIAL;
        }
    }
    create_dir(&dest)?;
    let hash = cfg.hash();
    match args.mode {
        Mode::Squeezing => {
            let (xi, nu) = pipeline::squeezing(&results, &settings)?;
            pipeline::write_xi_opt(&dest.join("xi_opt.csv"), &xi, &hash)?;
            pipeline::write_exponents(&dest.join("exponents.csv"), &nu, &hash)?;
        }
        Mode::Magnetization => {
            let (m, alpha) = pipeline::magnetization(&results)?;
            pipeline::write_mbar(&dest.join("mbar.csv"), &m, &hash)?;
            pipeline::write_exponents(&dest.join("exponents.csv"), &alpha, &hash)?;
        }
        Mode::Topt => {
            let fits = pipeline::topt(&results, &settings)?;
            pipeline::write_topt(&dest.join("topt.csv"), &fits, &hash)?;
        }
        Mode::PhaseDiagram => {
            let out = pipeline::phase_diagram(&results, &settings)?;
            pipeline::write_xi_opt(&dest.join("xi_opt.csv"), &out.xi, &hash)?;
            pipeline::write_mbar(&dest.join("mbar.csv"), &out.mbar, &hash)?;
            pipeline::write_exponents(&dest.join("exponents.csv"), &out.exponents, &hash)?;
            pipeline::write_phase_diagram(&dest, &out.diagram, &hash)?;
        }
    }
    emit(&format!("{}", dest.display()));
    Ok(code)
}

fn cmd_hist_jeff(args: &HistArgs) -> CmdResult {
    let cfg = resolve(&args.cfg)?;
    let out = cfg.resolved_out_dir();
    create_dir(&out)?;
    let plan = cfg.plan();
    let hash = cfg.hash();
    for (index, pt) in plan.points.iter().enumerate() {
        let params = plan.params(pt);
        let mut values = Vec::new();
        for k in 0..plan.n_realizations {
            let lat = build_lattice_with(pt.size, pt.p, plan.realization_seed(index, k), plan.boundary)?;
            values.extend(build_couplings(&lat, &params)?.row_sums());
        }
        let h = EffectiveFieldHistogram::from_values(values, args.bins_per_decade)?;
        let path = out.join(format!("hist_jeff_{}.csv", pt.dir_name().trim_start_matches("point_")));
        let header = io::provenance("hist-jeff", &hash);
        h.write_csv(&path, header.trim_start_matches("# "))?;
        emit(&format!("{} spread={}", path.display(), io::num(h.spread())));
    }
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> CmdResult {
    let cfg = resolve(&args.cfg)?;
    let out = cfg.resolved_out_dir();
    create_dir(&out)?;
    let hash = cfg.hash();
    let base = cfg.plan();
    let t_max = spinsqueeze::ensemble::plan_tmax(&base.tmax).t_max;
    for (index, pt) in base.points.iter().enumerate() {
        let run = |method: Method| {
            let plan = spinsqueeze::ensemble::SweepPlan { method, ..base.clone() };
            simulate_realization(&plan, index, 0, t_max).map(|r| r.series)
        };
        let exact = run(Method::Exact)?;
        let dtwa = run(Method::Dtwa)?;
        let ctwa = run(Method::Ctwa)?;
        let path = out.join(format!("oracle_{}.csv", pt.dir_name().trim_start_matches("point_")));
        write_oracle(&path, &exact, &dtwa, &ctwa, &hash)?;
        for s in [&dtwa, &ctwa] {
            let (max_abs, max_pull) = deviation(&exact, s);
            emit(&format!(
                "{} N={} {}: max|dxi2|={} max|dxi2|/err={}",
                pt.dir_name(),
                exact.n_spins,
                s.method.tag(),
                io::num(max_abs),
                io::num(max_pull)
            ));
        }
    }
    Ok(0)
}

/// Largest absolute ξ² deviation from exact and largest deviation in units
/// of the sampled error, over reliable times.
fn deviation(exact: &ObservableSeries, s: &ObservableSeries) -> (f64, f64) {
    exact
        .rows
        .iter()
        .zip(&s.rows)
        .filter(|(_, r)| r.reliable() && r.xi2_err > 0.0)
        .fold((0.0f64, 0.0f64), |(a, p), (e, r)| {
            let d = (r.xi2 - e.xi2).abs();
            (a.max(d), p.max(d / r.xi2_err))
        })
}

fn write_oracle(
    path: &Path,
    exact: &ObservableSeries,
    dtwa: &ObservableSeries,
    ctwa: &ObservableSeries,
    hash: &str,
) -> Result<(), Error> {
    let mut buf = io::provenance("oracle", hash);
    buf.push_str(
        "\nt,Sx_exact,xi2_exact,Sx_dtwa,Sx_dtwa_err,xi2_dtwa,xi2_dtwa_err,Sx_ctwa,Sx_ctwa_err,xi2_ctwa,xi2_ctwa_err\n",
    );
    for ((e, d), c) in exact.rows.iter().zip(&dtwa.rows).zip(&ctwa.rows) {
        let cols = [
            e.t, e.sx, e.xi2, d.sx, d.sx_err, d.xi2, d.xi2_err, c.sx, c.sx_err, c.xi2, c.xi2_err,
        ];
        buf.push_str(&cols.map(io::num).join(","));
        buf.push('\n');
    }
    io::write_atomic(path, buf.as_bytes())
}

/// Print a line to stdout; a closed pipe is not an error.
fn emit(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn dispatch(cli: Cli) -> CmdResult {
    if cli.describe_schema {
        let schema = serde_json::json!({
            "version": io::VERSION,
            "config": config_schema(),
            "outputs": output_schema(),
            "exit_codes": {"0": "success", "1": "usage or configuration error", "2": "runtime failure", "3": "partial results"}
        });
        emit(&serde_json::to_string_pretty(&schema).expect("schema serializes"));
        return Ok(0);
    }
    match cli.command {
        None => Err(Failure {
            code: EXIT_USAGE,
            message: "no command given; see --help".into(),
        }),
        Some(Command::Simulate(a)) => cmd_simulate(&a),
        Some(Command::Analyze(a)) => cmd_analyze(&a),
        Some(Command::HistJeff(a)) => cmd_hist_jeff(&a),
        Some(Command::Oracle(a)) => cmd_oracle(&a),
        Some(Command::Poisson { lambda }) => {
            emit(&io::num(poisson_effective_vacancy(lambda)?));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
