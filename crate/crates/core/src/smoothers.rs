//! Fitting methods and their checks.
//!
//! * [`fit_standard`]: penalised least squares with `C²` continuity only.
//! * [`fit_sufficient_qp`]: additionally `b ≥ 0`, which forces a nonnegative
//!   spline but shrinks the feasible set.
//! * [`fit_cutting_plane`]: exact nonnegativity through cuts at the
//!   minimisers of the current pieces.
//! * [`fit_discretized_oracle`]: nonnegativity on a fixed uniform grid, used
//!   to cross-check the cutting-plane result.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assembly::{bernstein_row, build_g, build_grid_rows, CutSet, ProblemMatrices};
use crate::bezier::{de_casteljau, validate_degree, Partition, SplineCoefficients};
use crate::data::Dataset;
use crate::error::{Result, SplineError};
use crate::polyroots::{minimize_coeffs, PieceMinimizer, RootStrategy};
use crate::qp::{
    kkt_residuals_at, solve_qp, KktResiduals, QpProblem, QpSettings, QpSolution, QpStatus,
};
use crate::sparse::SparseMatrix;

/// Default smoothing parameter.
pub const DEFAULT_LAMBDA: f64 = 1.0 / 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub degree: usize,
    pub lambda: f64,
    /// Cutting-plane termination: stop once every piece minimum is `≥ −ε`.
    pub epsilon: f64,
    pub max_cp_iterations: usize,
    /// Points per interval for grid minima and the discretised oracle.
    pub grid_points: usize,
    pub root_strategy: RootStrategy,
    pub qp: QpSettings,
    /// Lift the final cutting-plane spline by its most negative piece
    /// minimum, if any.
    pub shift: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            lambda: DEFAULT_LAMBDA,
            epsilon: 0.0,
            max_cp_iterations: 500,
            grid_points: 10_000,
            root_strategy: RootStrategy::Auto,
            qp: QpSettings::default(),
            shift: false,
        }
    }
}

impl FitConfig {
    pub fn new(degree: usize, lambda: f64) -> Self {
        Self {
            degree,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_degree(self.degree)?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SplineError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SplineError::Config(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.grid_points < 2 {
            return Err(SplineError::Config("grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    SufficientQp,
    CuttingPlane,
    DiscretizedOracle,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Standard,
        Method::SufficientQp,
        Method::CuttingPlane,
        Method::DiscretizedOracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::SufficientQp => "sufficient_qp",
            Method::CuttingPlane => "cutting_plane",
            Method::DiscretizedOracle => "discretized_oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SplineError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| SplineError::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    /// Every proposed cut duplicated an existing one while violations
    /// remained.
    Stalled,
}

/// One cutting-plane iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpIteration {
    pub r: usize,
    /// `f(b_r)`
    pub cost: f64,
    pub cuts_added: usize,
    pub cuts_rejected: usize,
    /// Most negative piece minimum at `b_r`.
    pub min_value: f64,
    pub qp_iterations: usize,
    pub qp_status: QpStatus,
    pub qp_time: Duration,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub coefficients: SplineCoefficients,
    pub cost: f64,
    pub method: Method,
    pub cp_trace: Vec<CpIteration>,
    pub cuts: CutSet,
    /// Multipliers of the inequality rows of the last QP.
    pub mu: Vec<f64>,
    /// Multipliers of the continuity rows of the last QP.
    pub nu: Vec<f64>,
    /// Piece minimisers at the returned coefficients (cutting plane only).
    pub final_minimizers: Vec<PieceMinimizer>,
    pub wall_time: Duration,
    pub assembly_time: Duration,
    pub termination: Termination,
    /// Constant added by the optional post-processing shift.
    pub shift: f64,
}

impl FitResult {
    pub fn cp_iterations(&self) -> usize {
        self.cp_trace.len()
    }

    /// Smallest spline value over a uniform grid of `points` per interval.
    pub fn grid_min(&self, points: usize) -> f64 {
        grid_min(&self.coefficients, points).0
    }
}

/// Smallest value of `s` on a uniform `τ`-grid with `points` per interval,
/// together with the abscissa where it is attained.
pub fn grid_min(s: &SplineCoefficients, points: usize) -> (f64, f64) {
    let points = points.max(2);
    let knots = s.partition().knots();
    let widths = s.partition().widths();
    let mut best = (f64::INFINITY, knots[0]);
    for i in 0..s.pieces() {
        let b = s.piece_coeffs(i);
        for j in 0..points {
            let t = j as f64 / (points - 1) as f64;
            let v = de_casteljau(b, t);
            if v < best.0 {
                best = (v, knots[i] + t * widths[i]);
            }
        }
    }
    best
}

/// Minimisers of every piece of `b`.
pub fn piece_minimizers(
    b: &[f64],
    d: usize,
    m: usize,
    strategy: RootStrategy,
) -> Vec<PieceMinimizer> {
    (0..m)
        .map(|i| minimize_coeffs(&b[d * i..=d * i + d], strategy))
        .collect()
}

fn solver_error(sol: &QpSolution, trace: Vec<CpIteration>) -> SplineError {
    SplineError::Solver {
        message: format!(
            "status {:?} after {} iterations, residuals {:?}",
            sol.status, sol.iterations, sol.kkt
        ),
        trace,
    }
}

struct Prepared {
    matrices: ProblemMatrices,
    assembly_time: Duration,
}

fn prepare(dataset: &Dataset, partition: &Partition, config: &FitConfig) -> Result<Prepared> {
    config.validate()?;
    let start = Instant::now();
    let matrices = ProblemMatrices::assemble(dataset, partition, config.degree)?;
    Ok(Prepared {
        matrices,
        assembly_time: start.elapsed(),
    })
}

fn single_qp(
    matrices: &ProblemMatrices,
    config: &FitConfig,
    method: Method,
    inequalities: SparseMatrix,
) -> Result<FitResult> {
    let start = Instant::now();
    let prob = matrices.qp(config.lambda, inequalities)?;
    let sol = solve_qp(&prob, &config.qp);
    let wall_time = start.elapsed();
    if sol.status != QpStatus::Optimal {
        return Err(solver_error(&sol, Vec::new()));
    }
    let cost = matrices.cost(&sol.b, config.lambda);
    Ok(FitResult {
        coefficients: SplineCoefficients::new(config.degree, matrices.partition.clone(), sol.b)?,
        cost,
        method,
        cp_trace: Vec::new(),
        cuts: CutSet::new(matrices.intervals()),
        mu: sol.mu,
        nu: sol.nu,
        final_minimizers: Vec::new(),
        wall_time,
        assembly_time: Duration::ZERO,
        termination: Termination::Converged,
        shift: 0.0,
    })
}

/// Penalised least squares with continuity constraints only.
pub fn fit_standard(
    dataset: &Dataset,
    partition: &Partition,
    config: &FitConfig,
) -> Result<FitResult> {
    let prep = prepare(dataset, partition, config)?;
    let n = prep.matrices.dim();
    let mut fit = single_qp(
        &prep.matrices,
        config,
        Method::Standard,
        SparseMatrix::zeros(0, n),
    )?;
    fit.assembly_time = prep.assembly_time;
    Ok(fit)
}

/// Componentwise `b ≥ 0`.
pub fn fit_sufficient_qp(
    dataset: &Dataset,
    partition: &Partition,
    config: &FitConfig,
) -> Result<FitResult> {
    if !dataset.is_nonnegative() {
        log::warn!("sufficient-condition fit called with negative data");
    }
    let prep = prepare(dataset, partition, config)?;
    let n = prep.matrices.dim();
    let mut fit = single_qp(
        &prep.matrices,
        config,
        Method::SufficientQp,
        SparseMatrix::identity(n),
    )?;
    fit.assembly_time = prep.assembly_time;
    Ok(fit)
}

/// Nonnegativity imposed at `grid_points` uniform `τ` values per interval.
pub fn fit_discretized_oracle(
    dataset: &Dataset,
    partition: &Partition,
    config: &FitConfig,
    grid_points: usize,
) -> Result<FitResult> {
    if grid_points < 2 {
        return Err(SplineError::Config(
            "oracle grid needs at least 2 points".into(),
        ));
    }
    let prep = prepare(dataset, partition, config)?;
    let rows = build_grid_rows(config.degree, partition.intervals(), grid_points);
    let mut fit = single_qp(&prep.matrices, config, Method::DiscretizedOracle, rows)?;
    fit.assembly_time = prep.assembly_time;
    Ok(fit)
}

/// Cutting-plane solution of the nonnegatively constrained problem.
pub fn fit_cutting_plane(
    dataset: &Dataset,
    partition: &Partition,
    config: &FitConfig,
) -> Result<FitResult> {
    if !dataset.is_nonnegative() {
        log::warn!("cutting-plane fit called with negative data");
    }
    let prep = prepare(dataset, partition, config)?;
    let mut fit = cutting_plane(&prep.matrices, config)?;
    fit.assembly_time = prep.assembly_time;
    Ok(fit)
}

/// Cutting-plane loop on already assembled matrices.
pub fn cutting_plane(matrices: &ProblemMatrices, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let start = Instant::now();
    let d = config.degree;
    let m = matrices.intervals();
    let n = matrices.dim();
    if matrices.degree != d {
        return Err(SplineError::Config(format!(
            "matrices have degree {}, config asks for {d}",
            matrices.degree
        )));
    }
    let base = matrices.qp(config.lambda, SparseMatrix::zeros(0, n))?;
    let mut cuts = CutSet::new(m);
    let mut trace: Vec<CpIteration> = Vec::new();

    let (sol, minimizers, termination) = loop {
        let r = trace.len();
        let g = build_g(&cuts, d, m)?;
        let rows = g.nrows();
        let prob = base.with_inequalities(g, vec![0.0; rows])?;
        let sol = solve_qp(&prob, &config.qp);
        if sol.status != QpStatus::Optimal {
            return Err(solver_error(&sol, trace));
        }
        let minimizers = piece_minimizers(&sol.b, d, m, config.root_strategy);
        let min_value = minimizers
            .iter()
            .map(|p| p.min_value)
            .fold(f64::INFINITY, f64::min);
        let mut record = CpIteration {
            r,
            cost: matrices.cost(&sol.b, config.lambda),
            cuts_added: 0,
            cuts_rejected: 0,
            min_value,
            qp_iterations: sol.iterations,
            qp_status: sol.status,
            qp_time: sol.wall_time,
            coefficients: sol.b.clone(),
        };
        if min_value >= -config.epsilon {
            trace.push(record);
            break (sol, minimizers, Termination::Converged);
        }
        if r >= config.max_cp_iterations {
            trace.push(record);
            break (sol, minimizers, Termination::MaxIters);
        }
        for (i, pm) in minimizers.iter().enumerate() {
            if pm.min_value < -config.epsilon {
                if cuts.insert(i, pm.tau)? {
                    record.cuts_added += 1;
                } else {
                    record.cuts_rejected += 1;
                }
            }
        }
        let stalled = record.cuts_added == 0;
        log::debug!(
            "cp r={r} cost={:.12e} min={:.3e} added={}",
            record.cost,
            min_value,
            record.cuts_added
        );
        trace.push(record);
        if stalled {
            break (sol, minimizers, Termination::Stalled);
        }
    };

    let mut b = sol.b;
    let mut shift = 0.0;
    let mut minimizers = minimizers;
    if config.shift {
        let low = minimizers
            .iter()
            .map(|p| p.min_value)
            .fold(f64::INFINITY, f64::min);
        if low < 0.0 {
            shift = -low;
            b.iter_mut().for_each(|v| *v += shift);
            minimizers = piece_minimizers(&b, d, m, config.root_strategy);
        }
    }
    let cost = matrices.cost(&b, config.lambda);
    Ok(FitResult {
        coefficients: SplineCoefficients::new(d, matrices.partition.clone(), b)?,
        cost,
        method: Method::CuttingPlane,
        cp_trace: trace,
        cuts,
        mu: sol.mu,
        nu: sol.nu,
        final_minimizers: minimizers,
        wall_time: start.elapsed(),
        assembly_time: Duration::ZERO,
        termination,
        shift,
    })
}

/// Runs `method`; the oracle uses `config.grid_points`.
pub fn fit(
    method: Method,
    dataset: &Dataset,
    partition: &Partition,
    config: &FitConfig,
) -> Result<FitResult> {
    match method {
        Method::Standard => fit_standard(dataset, partition, config),
        Method::SufficientQp => fit_sufficient_qp(dataset, partition, config),
        Method::CuttingPlane => fit_cutting_plane(dataset, partition, config),
        Method::DiscretizedOracle => {
            fit_discretized_oracle(dataset, partition, config, config.grid_points)
        }
    }
}

/// One row of the coefficient-error bound check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub r: usize,
    /// `‖b_ref − b_r‖²`
    pub lhs: f64,
    /// `(2/γ)(f(b_ref) − f(b_r)) + slack`
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖b_ref − b_r‖² ≤ (2/γ)(f(b_ref) − f(b_r)) + 1e−6(1 + ‖b_ref‖²)` for
/// every recorded iterate.
pub fn check_theorem3_bound(
    trace: &[CpIteration],
    reference: &FitResult,
    gamma: f64,
) -> Vec<BoundCheck> {
    let b_ref = reference.coefficients.coeffs();
    let ref_norm2: f64 = b_ref.iter().map(|v| v * v).sum();
    let slack = 1e-6 * (1.0 + ref_norm2);
    trace
        .iter()
        .map(|it| {
            let lhs: f64 = b_ref
                .iter()
                .zip(&it.coefficients)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let rhs = 2.0 / gamma * (reference.cost - it.cost) + slack;
            BoundCheck {
                r: it.r,
                lhs,
                rhs,
                holds: lhs <= rhs,
            }
        })
        .collect()
}

/// Residuals of the finite optimality system of a cutting-plane result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub residuals: KktResiduals,
    /// Rows of the constraint matrix: final cuts plus one row per piece.
    pub constraint_rows: usize,
}

/// Rebuilds the constraint rows from the final cuts followed by the final
/// piece minimisers, pads the last QP's multipliers with zeros for the
/// minimiser rows and evaluates the KKT residuals.
pub fn verify_kkt_certificate(
    result: &FitResult,
    matrices: &ProblemMatrices,
    lambda: f64,
) -> Result<KktReport> {
    kkt_certificate_with(result, matrices, lambda, &result.mu)
}

/// As [`verify_kkt_certificate`] with caller-supplied cut multipliers.
pub fn kkt_certificate_with(
    result: &FitResult,
    matrices: &ProblemMatrices,
    lambda: f64,
    mu: &[f64],
) -> Result<KktReport> {
    let d = matrices.degree;
    let m = matrices.intervals();
    let n = matrices.dim();
    let g = build_g(&result.cuts, d, m)?;
    if mu.len() != g.nrows() {
        return Err(SplineError::Dimension(format!(
            "{} multipliers for {} cuts",
            mu.len(),
            g.nrows()
        )));
    }
    let minimizers = if result.final_minimizers.len() == m {
        result.final_minimizers.clone()
    } else {
        piece_minimizers(result.coefficients.coeffs(), d, m, RootStrategy::Auto)
    };
    let extra = SparseMatrix::from_rows(
        n,
        minimizers
            .iter()
            .enumerate()
            .map(|(i, pm)| ((d * i..=d * i + d).collect(), bernstein_row(pm.tau, d))),
    );
    let c = g.vstack(&extra);
    let mut mu_full = mu.to_vec();
    mu_full.resize(c.nrows(), 0.0);
    let rows = c.nrows();
    let prob: QpProblem = matrices.qp(lambda, c)?;
    debug_assert_eq!(prob.inequality_rows(), rows);
    let residuals = kkt_residuals_at(&prob, result.coefficients.coeffs(), &mu_full, &result.nu);
    Ok(KktReport {
        residuals,
        constraint_rows: rows,
    })
}
