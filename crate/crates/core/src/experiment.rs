//! Batches of fits over `(n, d, seed, method)` cells with CSV, JSON and SVG
//! output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::generate_data;
use crate::error::{Result, SplineError};
use crate::plot::{render_svg, PlotOptions};
use crate::polyroots::RootStrategy;
use crate::smoothers::{fit, FitConfig, FitResult, Method, DEFAULT_LAMBDA};

pub const CSV_HEADER: &str = "n,d,seed,method,cost,time_ms,cp_iterations,total_cuts,grid_min";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub n_values: Vec<usize>,
    pub degrees: Vec<usize>,
    pub lambda: f64,
    pub epsilon: f64,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Points per interval for the oracle and for reported grid minima.
    pub grid_points: usize,
    pub root_strategy: RootStrategy,
    pub max_cp_iterations: usize,
    pub output_dir: PathBuf,
    /// Write one SVG overlay per `(n, d, seed)`.
    pub plots: bool,
    /// Interval (0-based) shown magnified in the plots.
    pub magnify_interval: Option<usize>,
    /// Run cells on the rayon thread pool.
    pub parallel: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_values: vec![10],
            degrees: vec![3],
            lambda: DEFAULT_LAMBDA,
            epsilon: 0.0,
            methods: vec![Method::SufficientQp, Method::CuttingPlane],
            seeds: vec![0],
            grid_points: 10_000,
            root_strategy: RootStrategy::Auto,
            max_cp_iterations: 500,
            output_dir: PathBuf::from("experiment-out"),
            plots: false,
            magnify_interval: None,
            parallel: true,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.contains(&0) {
            return Err(SplineError::Config("n must be at least 1".into()));
        }
        for &d in &self.degrees {
            self.config(d).validate()?;
        }
        Ok(())
    }

    pub fn config(&self, degree: usize) -> FitConfig {
        FitConfig {
            degree,
            lambda: self.lambda,
            epsilon: self.epsilon,
            max_cp_iterations: self.max_cp_iterations,
            grid_points: self.grid_points,
            root_strategy: self.root_strategy,
            ..FitConfig::default()
        }
    }
}

/// Outcome of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub method: Method,
    pub cost: f64,
    pub time_ms: f64,
    pub cp_iterations: usize,
    pub total_cuts: usize,
    pub grid_min: f64,
    pub error: Option<String>,
}

impl CellResult {
    fn key(&self) -> (usize, usize, u64, Method) {
        (self.n, self.d, self.seed, self.method)
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.16e},{:.3},{},{},{:.16e}",
            self.n,
            self.d,
            self.seed,
            self.method,
            self.cost,
            self.time_ms,
            self.cp_iterations,
            self.total_cuts,
            self.grid_min
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            out.push_str(&c.csv_line());
            out.push('\n');
        }
        out
    }
}

fn run_cell(
    n: usize,
    d: usize,
    seed: u64,
    method: Method,
    spec: &ExperimentSpec,
) -> (CellResult, Option<FitResult>) {
    let data = generate_data(n, seed);
    let mut cell = CellResult {
        n,
        d,
        seed,
        method,
        cost: f64::NAN,
        time_ms: f64::NAN,
        cp_iterations: 0,
        total_cuts: 0,
        grid_min: f64::NAN,
        error: None,
    };
    let outcome = data
        .knot_partition()
        .and_then(|part| fit(method, &data, &part, &spec.config(d)));
    match outcome {
        Ok(res) => {
            cell.cost = res.cost;
            cell.time_ms = res.wall_time.as_secs_f64() * 1e3;
            cell.cp_iterations = res.cp_iterations();
            cell.total_cuts = res.cuts.total();
            cell.grid_min = res.grid_min(spec.grid_points);
            (cell, Some(res))
        }
        Err(e) => {
            cell.error = Some(e.to_string());
            (cell, None)
        }
    }
}

/// Every cell, and the fit of each cell that succeeded.
pub type CellRun = (Vec<CellResult>, Vec<(CellResult, FitResult)>);

/// Runs every cell of `spec`; failed cells are recorded and the run goes on.
/// Cells are sorted by `(n, d, seed, method)`.
pub fn run_cells(spec: &ExperimentSpec) -> Result<CellRun> {
    spec.validate()?;
    let mut keys = Vec::new();
    for &n in &spec.n_values {
        for &d in &spec.degrees {
            for &seed in &spec.seeds {
                for &method in &spec.methods {
                    keys.push((n, d, seed, method));
                }
            }
        }
    }
    keys.sort();
    keys.dedup();
    let run =
        |&(n, d, seed, method): &(usize, usize, u64, Method)| run_cell(n, d, seed, method, spec);
    let mut results: Vec<(CellResult, Option<FitResult>)> = if spec.parallel {
        keys.par_iter().map(run).collect()
    } else {
        keys.iter().map(run).collect()
    };
    results.sort_by_key(|a| a.0.key());
    let cells = results.iter().map(|r| r.0.clone()).collect();
    let fits = results
        .into_iter()
        .filter_map(|(c, f)| f.map(|f| (c, f)))
        .collect();
    Ok((cells, fits))
}

fn io_err(path: &Path, e: std::io::Error) -> SplineError {
    SplineError::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Runs the experiment and writes `results.csv`, `summary.json` and, if
/// requested, `plot_n{n}_d{d}_seed{seed}.svg` into `spec.output_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let started = Instant::now();
    let (cells, fits) = run_cells(spec)?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let report = ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        cells,
    };
    write_file(&dir.join("results.csv"), &report.to_csv())?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| SplineError::Config(format!("cannot serialise report: {e}")))?;
    write_file(&dir.join("summary.json"), &json)?;

    if spec.plots {
        let mut groups: BTreeMap<(usize, usize, u64), Vec<(Method, FitResult)>> = BTreeMap::new();
        for (cell, res) in fits {
            groups
                .entry((cell.n, cell.d, cell.seed))
                .or_default()
                .push((cell.method, res));
        }
        for ((n, d, seed), fits) in groups {
            let data = generate_data(n, seed);
            let magnify = spec
                .magnify_interval
                .filter(|&i| i < n)
                .map(|i| (i as f64, i as f64 + 1.0));
            let names: Vec<String> = fits.iter().map(|(m, _)| m.to_string()).collect();
            let curves: Vec<(&str, &_)> = names
                .iter()
                .zip(&fits)
                .map(|(name, (_, r))| (name.as_str(), &r.coefficients))
                .collect();
            let svg = render_svg(
                &data,
                &curves,
                &PlotOptions {
                    magnify,
                    title: format!("n = {n}, d = {d}, seed = {seed}"),
                    ..PlotOptions::default()
                },
            );
            write_file(&dir.join(format!("plot_n{n}_d{d}_seed{seed}.svg")), &svg)?;
        }
    }
    log::info!("experiment finished in {:?}", started.elapsed());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_method_list_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            methods: vec![],
            output_dir: dir.path().to_path_buf(),
            ..ExperimentSpec::default()
        };
        let report = run_experiment(&spec).unwrap();
        assert!(report.cells.is_empty());
        let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn cells_are_sorted_and_reproducible() {
        let spec = ExperimentSpec {
            n_values: vec![8, 5],
            seeds: vec![2, 1],
            grid_points: 200,
            ..ExperimentSpec::default()
        };
        let (a, _) = run_cells(&spec).unwrap();
        let (b, _) = run_cells(&ExperimentSpec {
            parallel: false,
            ..spec.clone()
        })
        .unwrap();
        assert_eq!(a.len(), 8);
        assert!(a.windows(2).all(|w| w[0].key() < w[1].key()));
        let strip = |c: &CellResult| CellResult {
            time_ms: 0.0,
            ..c.clone()
        };
        assert_eq!(
            a.iter().map(strip).collect::<Vec<_>>(),
            b.iter().map(strip).collect::<Vec<_>>()
        );
    }
}
