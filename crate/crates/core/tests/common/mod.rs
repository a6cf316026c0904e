//! Independent oracles shared by the integration tests. None of them call
//! the evaluation, root-finding or QP code under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nnspline::bezier::Partition;
use nnspline::qp::QpProblem;
use nnspline::sparse::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn choose(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Monomial coefficients (ascending) of the Bernstein piece `b` by direct
/// binomial expansion of `τ^k (1−τ)^{d−k}`.
pub fn bernstein_to_monomial(b: &[f64]) -> Vec<f64> {
    let d = b.len() - 1;
    let mut out = vec![0.0; d + 1];
    for (k, &bk) in b.iter().enumerate() {
        let ck = choose(d, k);
        for j in 0..=d - k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            out[k + j] += bk * ck * choose(d - k, j) * sign;
        }
    }
    out
}

pub fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

pub fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, &v)| k as f64 * v)
        .collect()
}

/// Ascending coefficients of `lead · Π (τ − r)`.
pub fn plant(roots: &[f64], lead: f64) -> Vec<f64> {
    let mut c = vec![lead];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &v) in c.iter().enumerate() {
            next[k + 1] += v;
            next[k] -= r * v;
        }
        c = next;
    }
    c
}

/// Distinct roots uniformly in `[lo, hi]` at least `sep` apart.
pub fn separated_roots(rng: &mut impl Rng, count: usize, lo: f64, hi: f64, sep: f64) -> Vec<f64> {
    loop {
        let mut r: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if r.windows(2).all(|w| w[1] - w[0] >= sep) {
            return r;
        }
    }
}

/// Largest distance from a planted root to the nearest found root, and vice
/// versa; `INFINITY` when the counts differ.
pub fn root_error(planted: &[f64], found: &[f64]) -> f64 {
    if planted.len() != found.len() {
        return f64::INFINITY;
    }
    let near = |x: f64, set: &[f64]| {
        set.iter()
            .map(|y| (x - y).abs())
            .fold(f64::INFINITY, f64::min)
    };
    planted
        .iter()
        .map(|&p| near(p, found))
        .chain(found.iter().map(|&f| near(f, planted)))
        .fold(0.0, f64::max)
}

/// Gauss–Legendre nodes and weights on `[0, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `∫ |s''(x)|² dx` by Gauss–Legendre quadrature on each interval.
pub fn energy_by_quadrature(b: &[f64], d: usize, widths: &[f64]) -> f64 {
    let (nodes, weights) = gauss_legendre(d + 2);
    let mut total = 0.0;
    for (i, &w) in widths.iter().enumerate() {
        let mono = bernstein_to_monomial(&b[d * i..=d * i + d]);
        let second = poly_derivative(&poly_derivative(&mono));
        let integral: f64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &wt)| wt * poly_eval(&second, t).powi(2))
            .sum();
        // d²/dx² = Δ⁻² d²/dτ², dx = Δ dτ
        total += integral / w.powi(3);
    }
    total
}

/// Minimum of a Bernstein piece over `points` uniform samples, evaluated
/// through its monomial expansion.
pub fn grid_minimum(b: &[f64], points: usize) -> (f64, f64) {
    let mono = bernstein_to_monomial(b);
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..points {
        let t = j as f64 / (points - 1) as f64;
        let v = poly_eval(&mono, t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best
}

/// Dense QP `½xᵀPx + qᵀx` s.t. `Ex = e`, `Cx ≥ c` solved by enumerating
/// every active set; returns the best feasible objective and its point.
pub fn active_set_oracle(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    e: &DMatrix<f64>,
    e_rhs: &DVector<f64>,
    c: &DMatrix<f64>,
    c_rhs: &DVector<f64>,
) -> Option<(f64, DVector<f64>)> {
    let n = p.nrows();
    let mi = c.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << mi) {
        let active: Vec<usize> = (0..mi).filter(|k| mask & (1 << k) != 0).collect();
        let rows = e.nrows() + active.len();
        if rows > n {
            continue;
        }
        let mut a = DMatrix::zeros(rows, n);
        let mut rhs_a = DVector::zeros(rows);
        for r in 0..e.nrows() {
            a.set_row(r, &e.row(r));
            rhs_a[r] = e_rhs[r];
        }
        for (j, &k) in active.iter().enumerate() {
            a.set_row(e.nrows() + j, &c.row(k));
            rhs_a[e.nrows() + j] = c_rhs[k];
        }
        let mut kkt = DMatrix::zeros(n + rows, n + rows);
        kkt.view_mut((0, 0), (n, n)).copy_from(p);
        kkt.view_mut((0, n), (n, rows)).copy_from(&a.transpose());
        kkt.view_mut((n, 0), (rows, n)).copy_from(&a);
        let mut rhs = DVector::zeros(n + rows);
        rhs.rows_mut(0, n).copy_from(&(-q));
        rhs.rows_mut(n, rows).copy_from(&rhs_a);
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-8 {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let slack = c * &x - c_rhs;
        if slack.iter().any(|&s| s < -1e-9) {
            continue;
        }
        let obj = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best
}

pub fn random_partition(rng: &mut impl Rng, m: usize) -> Partition {
    let mut x = 0.0;
    let mut knots = vec![x];
    for _ in 0..m {
        x += rng.random_range(0.3..2.0);
        knots.push(x);
    }
    Partition::new(knots).unwrap()
}

/// Knots spread over roughly `[−1, 1]`.
pub fn small_partition(rng: &mut impl Rng, m: usize) -> Partition {
    let mut x = -1.0;
    let mut knots = vec![x];
    for _ in 0..m {
        x += rng.random_range(0.1..0.5);
        knots.push(x);
    }
    Partition::new(knots).unwrap()
}

pub fn random_coeffs(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Bernstein coefficients of the global polynomial `c` (ascending, in `x`)
/// restricted to each interval: power basis in `τ` first, then the standard
/// conversion `b_k = Σ_{j≤k} C(k,j)/C(d,j) a_j`.
pub fn global_polynomial_pieces(c: &[f64], d: usize, part: &Partition) -> Vec<f64> {
    let mut b = vec![0.0; d * part.intervals() + 1];
    let binom = |n: usize, k: usize| (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64);
    for i in 0..part.intervals() {
        let (x0, w) = (part.knots()[i], part.widths()[i]);
        // a_j: coefficients of c(x0 + wτ) in τ
        let mut a = vec![0.0; d + 1];
        for (p, &cp) in c.iter().enumerate() {
            for j in 0..=p {
                a[j] += cp * binom(p, j) * x0.powi((p - j) as i32) * w.powi(j as i32);
            }
        }
        for k in 0..=d {
            b[d * i + k] = (0..=k).map(|j| binom(k, j) / binom(d, j) * a[j]).sum();
        }
    }
    b
}

/// Random strictly convex dense QP.
pub struct Instance {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub e: DMatrix<f64>,
    pub e_rhs: DVector<f64>,
    pub c: DMatrix<f64>,
    pub c_rhs: DVector<f64>,
}

impl Instance {
    /// Random strictly convex QP with a known strictly feasible point.
    pub fn random(rng: &mut impl Rng, n: usize, me: usize, mi: usize) -> Self {
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let p = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let e = DMatrix::from_fn(me, n, |_, _| rng.random_range(-1.0..1.0));
        let e_rhs = &e * &x0;
        let c = DMatrix::from_fn(mi, n, |_, _| rng.random_range(-1.0..1.0));
        let c_rhs = &c * &x0 - DVector::from_fn(mi, |_, _| rng.random_range(0.01..1.0));
        Self {
            p,
            q,
            e,
            e_rhs,
            c,
            c_rhs,
        }
    }

    pub fn problem(&self) -> QpProblem {
        QpProblem::new(
            SparseMatrix::from_dense(&self.p),
            self.q.iter().copied().collect(),
            SparseMatrix::from_dense(&self.e),
            self.e_rhs.iter().copied().collect(),
            SparseMatrix::from_dense(&self.c),
            self.c_rhs.iter().copied().collect(),
        )
        .unwrap()
    }
}
