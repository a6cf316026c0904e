use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nnspline::convexity::strong_convexity_gamma;
use nnspline::data::{generate_data, load_dataset, save_dataset, DataError, Dataset};
use nnspline::experiment::{run_experiment, ExperimentSpec};
use nnspline::plot::{render_svg, PlotOptions};
use nnspline::polyroots::RootStrategy;
use nnspline::smoothers::{
    check_theorem3_bound, fit, fit_cutting_plane, fit_discretized_oracle, verify_kkt_certificate,
    FitConfig, Method, Termination, DEFAULT_LAMBDA,
};
use nnspline::{ProblemMatrices, SplineError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "nnspline", version, about = "Nonnegative spline smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset `x_i = i`, `i = 0..=n`.
    Generate {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit one dataset with one method.
    Fit {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long, value_enum, default_value_t = MethodArg::CuttingPlane)]
        method: MethodArg,
        /// JSON file for the full result; a summary is printed either way.
        #[arg(long)]
        output: Option<PathBuf>,
        /// SVG plot of the fit and the data.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run a grid of (n, d, seed, method) cells.
    Experiment {
        /// JSON experiment spec; flags given on the command line override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        degree: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Use seeds `0..repeats` (ignored when `--seed` is given).
        #[arg(long)]
        repeats: Option<u64>,
        #[arg(long, value_enum, value_delimiter = ',')]
        method: Vec<MethodArg>,
        /// Run no methods at all.
        #[arg(long, conflicts_with = "method")]
        no_methods: bool,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long, value_enum)]
        roots: Option<RootsArg>,
        #[arg(long)]
        plots: bool,
        /// Interval (0-based) to magnify in the plots.
        #[arg(long)]
        magnify: Option<usize>,
        /// Run cells one after another.
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check a cutting-plane fit against the dense-grid oracle, the
    /// finite KKT system and the coefficient error bound.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        knobs: Knobs,
        /// Allowed relative cost difference to the oracle.
        #[arg(long, default_value_t = 1e-6)]
        rel_tol: f64,
        /// JSON report file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// Dataset CSV (`x,y` header). Without it, data are generated.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Knobs {
    #[arg(long, default_value_t = 3)]
    degree: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Grid points per interval for the oracle and grid minima.
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = RootsArg::Auto)]
    roots: RootsArg,
    #[arg(long, default_value_t = 500)]
    max_cp_iterations: usize,
    /// Lift the cutting-plane result by its most negative value.
    #[arg(long)]
    shift: bool,
}

impl Knobs {
    fn config(&self) -> FitConfig {
        FitConfig {
            degree: self.degree,
            lambda: self.lambda,
            epsilon: self.epsilon,
            max_cp_iterations: self.max_cp_iterations,
            grid_points: self.grid,
            root_strategy: self.roots.into(),
            shift: self.shift,
            ..FitConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Standard,
    SufficientQp,
    CuttingPlane,
    DiscretizedOracle,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Standard => Method::Standard,
            MethodArg::SufficientQp => Method::SufficientQp,
            MethodArg::CuttingPlane => Method::CuttingPlane,
            MethodArg::DiscretizedOracle => Method::DiscretizedOracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RootsArg {
    Auto,
    Companion,
}

impl From<RootsArg> for RootStrategy {
    fn from(r: RootsArg) -> Self {
        match r {
            RootsArg::Auto => RootStrategy::Auto,
            RootsArg::Companion => RootStrategy::Companion,
        }
    }
}

/// Error with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

impl From<SplineError> for Failure {
    fn from(e: SplineError) -> Self {
        let code = match e {
            SplineError::Solver { .. } | SplineError::Degenerate(_) => EXIT_SOLVER,
            SplineError::Config(_) | SplineError::UnsupportedDegree(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure {
        code: EXIT_DATA,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable report")
}

fn load_source(source: &Source) -> Result<Dataset, Failure> {
    match &source.input {
        Some(path) => Ok(load_dataset(path, false)?),
        None => Ok(generate_data(source.n, source.seed)),
    }
}

fn cmd_fit(
    source: &Source,
    knobs: &Knobs,
    method: Method,
    output: Option<&Path>,
    plot: Option<&Path>,
) -> Result<(), Failure> {
    let data = load_source(source)?;
    if !data.is_nonnegative() && matches!(method, Method::SufficientQp | Method::CuttingPlane) {
        eprintln!("warning: data contain negative values");
    }
    let partition = data.knot_partition()?;
    let config = knobs.config();
    let res = fit(method, &data, &partition, &config)?;
    println!(
        "method={} cost={:.12e} termination={:?} cp_iterations={} cuts={} grid_min={:.6e} time_ms={:.3}",
        res.method,
        res.cost,
        res.termination,
        res.cp_iterations(),
        res.cuts.total(),
        res.grid_min(config.grid_points),
        res.wall_time.as_secs_f64() * 1e3
    );
    if let Some(path) = output {
        write_output(path, &to_json(&res))?;
    }
    if let Some(path) = plot {
        let svg = render_svg(
            &data,
            &[(method.name(), &res.coefficients)],
            &PlotOptions::default(),
        );
        write_output(path, &svg)?;
    }
    if res.termination != Termination::Converged {
        return Err(Failure {
            code: EXIT_SOLVER,
            message: format!("cutting plane stopped: {:?}", res.termination),
        });
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct VerifyReport {
    cp_cost: f64,
    oracle_cost: f64,
    relative_difference: f64,
    oracle_ok: bool,
    kkt: nnspline::smoothers::KktReport,
    kkt_ok: bool,
    gamma: f64,
    bound: Vec<nnspline::smoothers::BoundCheck>,
    bound_ok: bool,
}

fn cmd_verify(
    source: &Source,
    knobs: &Knobs,
    rel_tol: f64,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let data = load_source(source)?;
    let partition = data.knot_partition()?;
    let config = knobs.config();
    let cp = fit_cutting_plane(&data, &partition, &config)?;
    let oracle = fit_discretized_oracle(&data, &partition, &config, config.grid_points)?;
    let matrices = ProblemMatrices::assemble(&data, &partition, config.degree)?;
    let kkt = verify_kkt_certificate(&cp, &matrices, config.lambda)?;
    let gamma = strong_convexity_gamma(&matrices.a, &matrices.q, config.lambda, &matrices.h)?;
    let bound = check_theorem3_bound(&cp.cp_trace, &oracle, gamma);
    let rel = (cp.cost - oracle.cost).abs() / oracle.cost.abs().max(f64::MIN_POSITIVE);
    let report = VerifyReport {
        cp_cost: cp.cost,
        oracle_cost: oracle.cost,
        relative_difference: rel,
        oracle_ok: rel <= rel_tol,
        kkt_ok: cp.termination == Termination::Converged && kkt.residuals.all_below(1e-8),
        kkt,
        gamma,
        bound_ok: bound.iter().all(|b| b.holds),
        bound,
    };
    println!(
        "oracle: {} (cp {:.12e}, oracle {:.12e}, rel {:.3e})",
        pass(report.oracle_ok),
        report.cp_cost,
        report.oracle_cost,
        rel
    );
    println!(
        "kkt: {} (stationarity {:.3e}, equality {:.3e}, inequality {:.3e}, complementarity {:.3e})",
        pass(report.kkt_ok),
        report.kkt.residuals.stationarity,
        report.kkt.residuals.primal_eq,
        report.kkt.residuals.primal_ineq,
        report.kkt.residuals.complementarity
    );
    println!(
        "bound: {} ({} iterations, gamma {:.6e})",
        pass(report.bound_ok),
        report.bound.len(),
        gamma
    );
    if let Some(path) = output {
        write_output(path, &to_json(&report))?;
    }
    if report.oracle_ok && report.kkt_ok && report.bound_ok {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_SOLVER,
            message: "verification failed".into(),
        })
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { n, seed, output } => {
            if n == 0 {
                return Err(Failure {
                    code: EXIT_USAGE,
                    message: "n must be at least 1".into(),
                });
            }
            save_dataset(&generate_data(n, seed), &output)?;
            Ok(())
        }
        Command::Fit {
            source,
            knobs,
            method,
            output,
            plot,
        } => cmd_fit(
            &source,
            &knobs,
            method.into(),
            output.as_deref(),
            plot.as_deref(),
        ),
        Command::Verify {
            source,
            knobs,
            rel_tol,
            output,
        } => cmd_verify(&source, &knobs, rel_tol, output.as_deref()),
        Command::Experiment {
            config,
            n,
            degree,
            seed,
            repeats,
            method,
            no_methods,
            lambda,
            epsilon,
            grid,
            roots,
            plots,
            magnify,
            sequential,
            output,
        } => {
            let mut spec = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| Failure {
                        code: EXIT_DATA,
                        message: format!("cannot read {}: {e}", path.display()),
                    })?;
                    serde_json::from_str(&text).map_err(|e| Failure {
                        code: EXIT_DATA,
                        message: format!("invalid spec {}: {e}", path.display()),
                    })?
                }
                None => ExperimentSpec::default(),
            };
            if !n.is_empty() {
                spec.n_values = n;
            }
            if !degree.is_empty() {
                spec.degrees = degree;
            }
            if !seed.is_empty() {
                spec.seeds = seed;
            } else if let Some(r) = repeats {
                spec.seeds = (0..r).collect();
            }
            if no_methods {
                spec.methods.clear();
            } else if !method.is_empty() {
                spec.methods = method.into_iter().map(Method::from).collect();
            }
            if let Some(v) = lambda {
                spec.lambda = v;
            }
            if let Some(v) = epsilon {
                spec.epsilon = v;
            }
            if let Some(v) = grid {
                spec.grid_points = v;
            }
            if let Some(v) = roots {
                spec.root_strategy = v.into();
            }
            spec.plots |= plots;
            if magnify.is_some() {
                spec.magnify_interval = magnify;
            }
            if sequential {
                spec.parallel = false;
            }
            if let Some(dir) = output {
                spec.output_dir = dir;
            }
            let report = run_experiment(&spec)?;
            println!(
                "{} cells, {} failed; results in {}",
                report.cells.len(),
                report.failures(),
                spec.output_dir.display()
            );
            for cell in report.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!(
                    "n={} d={} seed={} {}: {}",
                    cell.n,
                    cell.d,
                    cell.seed,
                    cell.method,
                    cell.error.as_deref().unwrap_or_default()
                );
            }
            if report.failures() > 0 {
                Err(Failure {
                    code: EXIT_SOLVER,
                    message: "some cells failed".into(),
                })
            } else {
                Ok(())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
