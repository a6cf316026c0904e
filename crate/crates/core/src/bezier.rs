//! Splines in Bernstein–Bézier form.
//!
//! A spline of degree `d` on `m` intervals is stored as one coefficient
//! vector `b` of length `d·m + 1`. Piece `i` (0-based here) owns the slice
//! `b[d·i ..= d·i + d]`, so neighbouring pieces share their boundary
//! coefficient and the spline is continuous for every `b`. Inside a piece the
//! abscissa is normalised to `τ = (x − ξ_i) / Δ_i ∈ [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SplineError};

/// Smallest spline degree supported by the smoothing routines.
pub const MIN_DEGREE: usize = 3;
/// Largest polynomial degree handled anywhere in the crate.
pub const MAX_DEGREE: usize = 10;

const BINOM_ROWS: usize = 2 * MAX_DEGREE + 1;

const fn binomial_table() -> [[u64; BINOM_ROWS]; BINOM_ROWS] {
    let mut t = [[0u64; BINOM_ROWS]; BINOM_ROWS];
    let mut n = 0;
    while n < BINOM_ROWS {
        t[n][0] = 1;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0 };
            k += 1;
        }
        n += 1;
    }
    t
}

static BINOMIALS: [[u64; BINOM_ROWS]; BINOM_ROWS] = binomial_table();

/// Exact binomial coefficient `C(n, k)` for `n <= 20`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        0
    } else {
        BINOMIALS[n][k]
    }
}

/// Knot sequence `ξ_0 < ξ_1 < … < ξ_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    knots: Vec<f64>,
    widths: Vec<f64>,
}

impl Partition {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(SplineError::TooFewKnots(knots.len()));
        }
        for (i, pair) in knots.windows(2).enumerate() {
            if !(pair[0] < pair[1]) || !pair[1].is_finite() || !pair[0].is_finite() {
                return Err(SplineError::KnotsNotIncreasing {
                    index: i + 1,
                    value: pair[1],
                });
            }
        }
        let widths = knots.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { knots, widths })
    }

    /// Knots at the integers `0, 1, …, m`.
    pub fn integers(m: usize) -> Result<Self> {
        Self::new((0..=m).map(|i| i as f64).collect())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Number of intervals `m`.
    pub fn intervals(&self) -> usize {
        self.widths.len()
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Finds the piece containing `x` and the local parameter `τ`.
    ///
    /// Interior knots belong to the piece on their right; the last knot maps
    /// to `τ = 1` of the final piece.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let (lo, hi) = (self.start(), self.end());
        if !(x >= lo && x <= hi) {
            return Err(SplineError::Domain {
                what: "x",
                value: x,
                lo,
                hi,
            });
        }
        let m = self.intervals();
        if x == hi {
            return Ok((m - 1, 1.0));
        }
        let piece = self.knots.partition_point(|&k| k <= x) - 1;
        let tau = (x - self.knots[piece]) / self.widths[piece];
        Ok((piece, tau.clamp(0.0, 1.0)))
    }
}

/// One polynomial piece in Bernstein form over `τ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolynomial {
    coeffs: Vec<f64>,
}

impl LocalPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_DEGREE + 1 {
            return Err(SplineError::UnsupportedDegree(
                coeffs.len().saturating_sub(1),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn from_slice(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.to_vec())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value at `τ`, which must lie in `[0, 1]`.
    pub fn evaluate(&self, tau: f64) -> Result<f64> {
        evaluate_piece(self, tau)
    }
}

/// Evaluates a piece at `τ ∈ [0, 1]` by de Casteljau's recursion.
pub fn evaluate_piece(p: &LocalPolynomial, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(SplineError::Domain {
            what: "tau",
            value: tau,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(de_casteljau(&p.coeffs, tau))
}

/// De Casteljau evaluation of Bernstein coefficients at `t`. No range check.
pub fn de_casteljau(coeffs: &[f64], t: f64) -> f64 {
    debug_assert!(!coeffs.is_empty() && coeffs.len() <= MAX_DEGREE + 1);
    let mut work = [0.0f64; MAX_DEGREE + 1];
    let n = coeffs.len();
    work[..n].copy_from_slice(coeffs);
    let s = 1.0 - t;
    for level in 1..n {
        for k in 0..n - level {
            work[k] = s * work[k] + t * work[k + 1];
        }
    }
    work[0]
}

/// Monomial coefficients (ascending powers of `τ`) of `dp/dτ`.
///
/// The coefficient of `τ^l` is
/// `Σ_{k≤l} d!(−1)^{l−k}(b_{k+1} − b_k) / ((d−l−1)!(l−k)!k!)`, which equals
/// `d·C(d−1, l)·C(l, k)` times the signed forward difference.
pub fn derivative_monomial_coeffs(p: &LocalPolynomial) -> Result<Vec<f64>> {
    let d = p.degree();
    if d == 0 {
        return Err(SplineError::UnsupportedDegree(0));
    }
    Ok(derivative_monomial_from_slice(&p.coeffs))
}

pub(crate) fn derivative_monomial_from_slice(b: &[f64]) -> Vec<f64> {
    let d = b.len() - 1;
    let mut out = vec![0.0; d];
    for (l, slot) in out.iter_mut().enumerate() {
        let outer = (d as u64 * binomial(d - 1, l)) as f64;
        let mut acc = 0.0;
        for k in 0..=l {
            let term = binomial(l, k) as f64 * (b[k + 1] - b[k]);
            if (l - k) % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        *slot = outer * acc;
    }
    out
}

/// Horner evaluation of ascending monomial coefficients.
pub fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Bernstein–Bézier coefficient vector of a spline together with its degree
/// and partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCoefficients {
    degree: usize,
    partition: Partition,
    coeffs: Vec<f64>,
}

impl SplineCoefficients {
    pub fn new(degree: usize, partition: Partition, coeffs: Vec<f64>) -> Result<Self> {
        validate_degree(degree)?;
        let expected = degree * partition.intervals() + 1;
        if coeffs.len() != expected {
            return Err(SplineError::CoefficientLength {
                got: coeffs.len(),
                expected,
            });
        }
        Ok(Self {
            degree,
            partition,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn pieces(&self) -> usize {
        self.partition.intervals()
    }

    /// Coefficients `b_⟨i⟩` of piece `i` (0-based).
    pub fn piece_coeffs(&self, i: usize) -> &[f64] {
        let d = self.degree;
        &self.coeffs[d * i..=d * i + d]
    }

    pub fn piece(&self, i: usize) -> LocalPolynomial {
        LocalPolynomial {
            coeffs: self.piece_coeffs(i).to_vec(),
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        evaluate_spline(self, x)
    }

    /// Same spline written with degree `d + 1`; every piece is raised with
    /// the standard Bernstein degree-elevation rule.
    pub fn elevate_degree(&self) -> Result<Self> {
        let d = self.degree;
        validate_degree(d + 1)?;
        let m = self.pieces();
        let mut out = vec![0.0; (d + 1) * m + 1];
        for i in 0..m {
            let b = self.piece_coeffs(i);
            let base = (d + 1) * i;
            out[base] = b[0];
            for k in 1..=d {
                let a = k as f64 / (d + 1) as f64;
                out[base + k] = a * b[k - 1] + (1.0 - a) * b[k];
            }
            out[base + d + 1] = b[d];
        }
        Self::new(d + 1, self.partition.clone(), out)
    }
}

/// Value of the spline at `x ∈ [ξ_0, ξ_m]`.
pub fn evaluate_spline(s: &SplineCoefficients, x: f64) -> Result<f64> {
    let (piece, tau) = s.partition.locate(x)?;
    Ok(de_casteljau(s.piece_coeffs(piece), tau))
}

pub(crate) fn validate_degree(d: usize) -> Result<()> {
    if (MIN_DEGREE..=MAX_DEGREE).contains(&d) {
        Ok(())
    } else {
        Err(SplineError::UnsupportedDegree(d))
    }
}
