//! Convex quadratic programs
//!
//! ```text
//! minimize   ½ bᵀPb + qᵀb + const
//! subject to Eb = e,  Cb ≥ c
//! ```
//!
//! solved by a Mehrotra predictor-corrector primal-dual interior-point
//! method. Multiplier signs follow the stationarity condition
//! `Pb + q − Cᵀμ + Eᵀν = 0` with `μ ≥ 0`.

mod kkt;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SplineError};
use crate::sparse::SparseMatrix;
use kkt::KktSystem;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub(crate) p: SparseMatrix,
    pub(crate) q: Vec<f64>,
    pub(crate) e: SparseMatrix,
    pub(crate) e_rhs: Vec<f64>,
    pub(crate) c: SparseMatrix,
    pub(crate) c_rhs: Vec<f64>,
    pub(crate) constant: f64,
}

impl QpProblem {
    /// `p` must be symmetric and stored in full (both triangles).
    pub fn new(
        p: SparseMatrix,
        q: Vec<f64>,
        e: SparseMatrix,
        e_rhs: Vec<f64>,
        c: SparseMatrix,
        c_rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = q.len();
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(SplineError::Dimension(what.to_string()))
            }
        };
        check(
            p.nrows() == n && p.ncols() == n,
            "P must be n×n with n = len(q)",
        )?;
        check(e.ncols() == n, "E must have n columns")?;
        check(e.nrows() == e_rhs.len(), "len(e) must equal rows of E")?;
        check(c.ncols() == n, "C must have n columns")?;
        check(c.nrows() == c_rhs.len(), "len(c) must equal rows of C")?;
        Ok(Self {
            p,
            q,
            e,
            e_rhs,
            c,
            c_rhs,
            constant: 0.0,
        })
    }

    /// Problem without constraints.
    pub fn unconstrained(p: SparseMatrix, q: Vec<f64>) -> Result<Self> {
        let n = q.len();
        Self::new(
            p,
            q,
            SparseMatrix::zeros(0, n),
            Vec::new(),
            SparseMatrix::zeros(0, n),
            Vec::new(),
        )
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    /// Same objective and equalities, different inequality rows.
    pub fn with_inequalities(&self, c: SparseMatrix, c_rhs: Vec<f64>) -> Result<Self> {
        Self::new(
            self.p.clone(),
            self.q.clone(),
            self.e.clone(),
            self.e_rhs.clone(),
            c,
            c_rhs,
        )
        .map(|p| p.with_constant(self.constant))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn equality_rows(&self) -> usize {
        self.e.nrows()
    }

    pub fn inequality_rows(&self) -> usize {
        self.c.nrows()
    }

    pub fn p(&self) -> &SparseMatrix {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn e(&self) -> &SparseMatrix {
        &self.e
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn objective(&self, b: &[f64]) -> f64 {
        0.5 * self.p.quad_form(b) + dot(&self.q, b) + self.constant
    }

    /// `Pb + q`
    pub fn gradient(&self, b: &[f64]) -> Vec<f64> {
        let mut g = self.p.mul_vec(b);
        g.iter_mut().zip(&self.q).for_each(|(g, q)| *g += q);
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Bound on each max-norm KKT residual.
    pub tol: f64,
    /// Relative duality-gap bound `sᵀz ≤ gap_tol · (1 + |objective|)`.
    pub gap_tol: f64,
    pub max_iter: usize,
    pub regularization: f64,
    pub refinement_steps: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            gap_tol: 1e-8,
            max_iter: 100,
            regularization: 1e-10,
            refinement_steps: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIters,
    NumericalFailure,
}

/// Max-norms of the four KKT conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub b: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub status: QpStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub wall_time: Duration,
    pub objective: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Residuals of `(b, μ, ν)` for problem `p`.
pub fn kkt_residuals_at(p: &QpProblem, b: &[f64], mu: &[f64], nu: &[f64]) -> KktResiduals {
    let mut stat = p.gradient(b);
    let neg_mu: Vec<f64> = mu.iter().map(|v| -v).collect();
    p.c.tmul_add(&neg_mu, &mut stat);
    p.e.tmul_add(nu, &mut stat);
    let eb = p.e.mul_vec(b);
    let primal_eq = eb
        .iter()
        .zip(&p.e_rhs)
        .fold(0.0f64, |a, (v, r)| a.max((v - r).abs()));
    let slack: Vec<f64> =
        p.c.mul_vec(b)
            .iter()
            .zip(&p.c_rhs)
            .map(|(v, r)| v - r)
            .collect();
    let primal_ineq = slack.iter().fold(0.0f64, |a, &s| a.max(-s));
    let complementarity = slack
        .iter()
        .zip(mu)
        .fold(0.0f64, |a, (s, m)| a.max((s * m).abs()));
    KktResiduals {
        stationarity: max_abs(&stat),
        primal_eq,
        primal_ineq,
        complementarity,
    }
}

pub fn kkt_residuals(p: &QpProblem, sol: &QpSolution) -> KktResiduals {
    kkt_residuals_at(p, &sol.b, &sol.mu, &sol.nu)
}

pub fn solve_qp(p: &QpProblem, settings: &QpSettings) -> QpSolution {
    let start = Instant::now();
    let mut sol = if p.inequality_rows() == 0 {
        solve_equality(p, settings)
    } else {
        solve_ipm(p, settings)
    };
    sol.wall_time = start.elapsed();
    sol
}

fn failure(p: &QpProblem, iterations: usize) -> QpSolution {
    QpSolution {
        b: vec![f64::NAN; p.dim()],
        mu: vec![f64::NAN; p.inequality_rows()],
        nu: vec![f64::NAN; p.equality_rows()],
        status: QpStatus::NumericalFailure,
        kkt: KktResiduals {
            stationarity: f64::INFINITY,
            primal_eq: f64::INFINITY,
            primal_ineq: f64::INFINITY,
            complementarity: f64::INFINITY,
        },
        iterations,
        wall_time: Duration::ZERO,
        objective: f64::NAN,
    }
}

fn finish(
    p: &QpProblem,
    b: Vec<f64>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let kkt = kkt_residuals_at(p, &b, &mu, &nu);
    let objective = p.objective(&b);
    QpSolution {
        b,
        mu,
        nu,
        status,
        kkt,
        iterations,
        wall_time: Duration::ZERO,
        objective,
    }
}

/// Equality-constrained case: one linear solve of the KKT system.
fn solve_equality(p: &QpProblem, settings: &QpSettings) -> QpSolution {
    let n = p.dim();
    let mut system = KktSystem::new(p, settings.regularization, settings.refinement_steps.max(8));
    if !system.factor(&[]) {
        return failure(p, 0);
    }
    let mut rhs: Vec<f64> = p.q.iter().map(|v| -v).collect();
    rhs.extend_from_slice(&p.e_rhs);
    let x = system.solve(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return failure(p, 1);
    }
    let (b, nu) = x.split_at(n);
    let sol = finish(p, b.to_vec(), Vec::new(), nu.to_vec(), QpStatus::Optimal, 1);
    // a single solve cannot beat rounding in P·b, so stationarity is judged
    // relative to the size of P
    let p_scale = p.p.max_abs().max(1.0);
    let scaled = KktResiduals {
        stationarity: sol.kkt.stationarity / p_scale,
        ..sol.kkt
    };
    if scaled.all_below(settings.tol) {
        sol
    } else {
        log::debug!("equality solve residuals {:?}", sol.kkt);
        QpSolution {
            status: QpStatus::NumericalFailure,
            ..sol
        }
    }
}

/// Largest `α ∈ (0, 1]` with `v + α·dv ≥ 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(1.0f64, f64::min)
}

fn solve_ipm(p: &QpProblem, settings: &QpSettings) -> QpSolution {
    let n = p.dim();
    let mi = p.inequality_rows();
    let mut system = KktSystem::new(p, settings.regularization, settings.refinement_steps);

    // Starting point from the least-squares problem with unit weights.
    if !system.factor(&vec![1.0; mi]) {
        return failure(p, 0);
    }
    let mut rhs: Vec<f64> = p.q.iter().map(|v| -v).collect();
    p.c.tmul_add(&p.c_rhs, &mut rhs);
    rhs.extend_from_slice(&p.e_rhs);
    let x0 = system.solve(&rhs);
    if x0.iter().any(|v| !v.is_finite()) {
        return failure(p, 0);
    }
    let mut b = x0[..n].to_vec();
    let mut nu = x0[n..].to_vec();
    let cb = p.c.mul_vec(&b);
    let mut s: Vec<f64> = cb
        .iter()
        .zip(&p.c_rhs)
        .map(|(v, r)| (v - r).max(1.0))
        .collect();
    let mut z = vec![1.0; mi];

    for iter in 0..settings.max_iter {
        // residuals
        let mut r_d = p.gradient(&b);
        let neg_z: Vec<f64> = z.iter().map(|v| -v).collect();
        p.c.tmul_add(&neg_z, &mut r_d);
        p.e.tmul_add(&nu, &mut r_d);
        let r_e: Vec<f64> =
            p.e.mul_vec(&b)
                .iter()
                .zip(&p.e_rhs)
                .map(|(v, r)| v - r)
                .collect();
        let cb = p.c.mul_vec(&b);
        let r_i: Vec<f64> = (0..mi).map(|k| cb[k] - s[k] - p.c_rhs[k]).collect();
        let gap = dot(&s, &z);
        let mu_avg = gap / mi as f64;

        let kkt = kkt_residuals_at(p, &b, &z, &nu);
        let objective = p.objective(&b);
        if kkt.all_below(settings.tol) && gap <= settings.gap_tol * (1.0 + objective.abs()) {
            return finish(p, b, z, nu, QpStatus::Optimal, iter);
        }
        if !kkt.max().is_finite() || !gap.is_finite() {
            return failure(p, iter);
        }

        let w: Vec<f64> = z.iter().zip(&s).map(|(z, s)| z / s).collect();
        if !system.factor(&w) {
            return failure(p, iter);
        }

        // Δs = CΔb + r_i,  Δz = S⁻¹(r_c − ZΔs)
        let direction = |r_c: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
            let t: Vec<f64> = (0..mi).map(|k| r_c[k] / s[k] - w[k] * r_i[k]).collect();
            let mut rhs: Vec<f64> = r_d.iter().map(|v| -v).collect();
            p.c.tmul_add(&t, &mut rhs);
            rhs.extend(r_e.iter().map(|v| -v));
            let x = system.solve(&rhs);
            let db = x[..n].to_vec();
            let dnu = x[n..].to_vec();
            let cdb = p.c.mul_vec(&db);
            let ds: Vec<f64> = (0..mi).map(|k| cdb[k] + r_i[k]).collect();
            let dz: Vec<f64> = (0..mi).map(|k| (r_c[k] - z[k] * ds[k]) / s[k]).collect();
            (db, dnu, ds, dz)
        };

        // predictor
        let r_c: Vec<f64> = (0..mi).map(|k| -s[k] * z[k]).collect();
        let (_, _, ds_aff, dz_aff) = direction(&r_c);
        let alpha_aff = max_step(&s, &ds_aff).min(max_step(&z, &dz_aff));
        let mu_aff = (0..mi)
            .map(|k| (s[k] + alpha_aff * ds_aff[k]) * (z[k] + alpha_aff * dz_aff[k]))
            .sum::<f64>()
            / mi as f64;
        let sigma = (mu_aff / mu_avg).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_c: Vec<f64> = (0..mi)
            .map(|k| -s[k] * z[k] - ds_aff[k] * dz_aff[k] + sigma * mu_avg)
            .collect();
        let (db, dnu, ds, dz) = direction(&r_c);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        if !alpha.is_finite() || db.iter().any(|v| !v.is_finite()) {
            return failure(p, iter);
        }

        for (v, d) in b.iter_mut().zip(&db) {
            *v += alpha * d;
        }
        for (v, d) in nu.iter_mut().zip(&dnu) {
            *v += alpha * d;
        }
        for (v, d) in s.iter_mut().zip(&ds) {
            *v += alpha * d;
        }
        for (v, d) in z.iter_mut().zip(&dz) {
            *v += alpha * d;
        }
    }

    let sol = finish(p, b, z, nu, QpStatus::MaxIters, settings.max_iter);
    let gap_ok = sol
        .mu
        .iter()
        .zip(p.c.mul_vec(&sol.b).iter().zip(&p.c_rhs))
        .map(|(m, (v, r))| m * (v - r))
        .sum::<f64>()
        .abs()
        <= settings.gap_tol * (1.0 + sol.objective.abs());
    if sol.kkt.all_below(settings.tol) && gap_ok {
        QpSolution {
            status: QpStatus::Optimal,
            ..sol
        }
    } else {
        sol
    }
}
