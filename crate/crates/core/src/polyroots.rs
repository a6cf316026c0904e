//! Real roots of low-degree polynomials and exact minimisation of one
//! Bernstein piece over `[0, 1]`.
//!
//! All coefficient slices are in ascending powers: `c[0] + c[1]·τ + …`.
//! Closed forms cover degrees up to four; anything higher goes through the
//! eigenvalues of the companion matrix. Every root is polished with at most
//! two Newton steps on the original coefficients.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::bezier::{de_casteljau, derivative_monomial_from_slice, horner, LocalPolynomial};
use crate::error::{Result, SplineError};

/// Eigenvalues with a larger imaginary part are not treated as real roots.
pub const IMAG_TOLERANCE: f64 = 1e-8;
/// Roots this far outside `[0, 1]` are still clamped onto the interval.
pub const INTERVAL_SLACK: f64 = 1e-12;
/// Derivatives whose coefficients are all below this are treated as zero.
pub const FLAT_TOLERANCE: f64 = 1e-14;
/// Candidate values closer than this count as ties (smallest `τ` wins).
pub const TIE_TOLERANCE: f64 = 1e-12;

const NEWTON_STEPS: usize = 2;
const NEWTON_STOP: f64 = 1e-14;
const MERGE_TOLERANCE: f64 = 1e-7;

/// How the stationary points of a piece are located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStrategy {
    /// Closed forms up to a quartic derivative, companion matrix beyond.
    #[default]
    Auto,
    /// Companion-matrix eigenvalues for every degree.
    Companion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerMethod {
    ClosedForm,
    CompanionMatrix,
    ConstantPiece,
}

/// Global minimiser of one piece on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieceMinimizer {
    pub tau: f64,
    pub min_value: f64,
    pub method: MinimizerMethod,
}

fn newton_polish(c: &[f64], mut x: f64) -> f64 {
    let dc: Vec<f64> = c
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &v)| k as f64 * v)
        .collect();
    let mut fx = horner(c, x);
    for _ in 0..NEWTON_STEPS {
        let dfx = horner(&dc, x);
        if dfx == 0.0 || !dfx.is_finite() {
            break;
        }
        let step = fx / dfx;
        let candidate = x - step;
        let fc = horner(c, candidate);
        // keep the step only if it does not increase the residual
        if !(fc.abs() <= fx.abs()) {
            break;
        }
        x = candidate;
        fx = fc;
        if step.abs() < NEWTON_STOP * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

fn finish(c: &[f64], raw: Vec<f64>) -> Vec<f64> {
    let mut roots: Vec<f64> = raw
        .into_iter()
        .filter(|r| r.is_finite())
        .map(|r| newton_polish(c, r))
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= MERGE_TOLERANCE * (1.0 + b.abs()));
    roots
}

fn quadratic_raw(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    if c2 == 0.0 {
        return if c1 == 0.0 {
            Vec::new()
        } else {
            vec![-c0 / c1]
        };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let scale = (c1 * c1).max((4.0 * c2 * c0).abs());
    if disc < 0.0 {
        if disc >= -1e-14 * scale {
            return vec![-c1 / (2.0 * c2)];
        }
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-c1 / (2.0 * c2)];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (c1 + if c1 >= 0.0 { sq } else { -sq });
    let mut out = vec![q / c2];
    if q != 0.0 {
        out.push(c0 / q);
    }
    out
}

/// Real roots of `c0 + c1·τ + c2·τ²`; a zero leading coefficient degrades to
/// the linear case. A double root is reported once.
pub fn roots_quadratic(c: [f64; 3]) -> Vec<f64> {
    finish(&c, quadratic_raw(c[0], c[1], c[2]))
}

fn cubic_raw(c: [f64; 4]) -> Vec<f64> {
    if c[3] == 0.0 {
        return quadratic_raw(c[0], c[1], c[2]);
    }
    if c[0] == 0.0 {
        let mut out = quadratic_raw(c[1], c[2], c[3]);
        out.push(0.0);
        return out;
    }
    let a = c[2] / c[3];
    let b = c[1] / c[3];
    let cc = c[0] / c[3];
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * cc) / 54.0;
    let shift = a / 3.0;
    let r2 = r * r;
    let q3 = q * q * q;
    if r2 < q3 {
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let two_pi = 2.0 * std::f64::consts::PI;
        return vec![
            m * (theta / 3.0).cos() - shift,
            m * ((theta + two_pi) / 3.0).cos() - shift,
            m * ((theta - two_pi) / 3.0).cos() - shift,
        ];
    }
    let big_a = -r.signum() * (r.abs() + (r2 - q3).max(0.0).sqrt()).cbrt();
    let big_b = if big_a == 0.0 { 0.0 } else { q / big_a };
    let mut out = vec![big_a + big_b - shift];
    // near-coincident pair: the real part of the complex pair is a double root
    if r2 - q3 <= 1e-12 * r2.max(q3.abs()) {
        out.push(-0.5 * (big_a + big_b) - shift);
    }
    out
}

/// Real roots of a cubic (trigonometric / Cardano branches on the sign of
/// the discriminant). A zero leading coefficient delegates to the quadratic.
pub fn roots_cubic(c: [f64; 4]) -> Vec<f64> {
    finish(&c, cubic_raw(c))
}

fn quartic_raw(c: [f64; 5]) -> Vec<f64> {
    if c[4] == 0.0 {
        return cubic_raw([c[0], c[1], c[2], c[3]]);
    }
    if c[0] == 0.0 {
        let mut out = cubic_raw([c[1], c[2], c[3], c[4]]);
        out.push(0.0);
        return out;
    }
    let a = c[3] / c[4];
    let b = c[2] / c[4];
    let cc = c[1] / c[4];
    let d = c[0] / c[4];
    let a2 = a * a;
    let p = b - 3.0 * a2 / 8.0;
    let q = cc - a * b / 2.0 + a2 * a / 8.0;
    let r = d - a * cc / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;
    let shift = a / 4.0;
    let scale = 1.0 + p.abs() + r.abs().sqrt();

    let biquadratic = |out: &mut Vec<f64>| {
        for z in quadratic_raw(r, p, 1.0) {
            if z >= 0.0 {
                let y = z.sqrt();
                out.push(y - shift);
                out.push(-y - shift);
            } else if z > -1e-12 * scale {
                out.push(-shift);
            }
        }
    };

    let mut out = Vec::new();
    if q.abs() <= 1e-14 * scale * scale.sqrt() {
        biquadratic(&mut out);
        return out;
    }
    // resolvent cubic 8m³ + 8p m² + (2p² − 8r) m − q² = 0; its largest root is positive
    let resolvent = [-q * q, 2.0 * p * p - 8.0 * r, 8.0 * p, 8.0];
    let m = cubic_raw(resolvent)
        .into_iter()
        .map(|m| newton_polish(&resolvent, m))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(m > 0.0) {
        biquadratic(&mut out);
        return out;
    }
    let s = (2.0 * m).sqrt();
    let base = p / 2.0 + m;
    let t = q / (2.0 * s);
    for y in quadratic_raw(base + t, -s, 1.0)
        .into_iter()
        .chain(quadratic_raw(base - t, s, 1.0))
    {
        out.push(y - shift);
    }
    out
}

/// Real roots of a quartic by Ferrari's resolvent-cubic method. A zero
/// leading coefficient delegates to the cubic.
pub fn roots_quartic(c: [f64; 5]) -> Vec<f64> {
    finish(&c, quartic_raw(c))
}

/// Parlett–Reinsch balancing with powers of two; returns the scaled matrix.
fn balance(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].abs();
                    row += m[(i, j)].abs();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let sum = col + row;
            let mut f = 1.0;
            let mut g = row / radix;
            while col < g {
                f *= radix;
                col *= radix * radix;
            }
            g = row * radix;
            while col > g {
                f /= radix;
                col /= radix * radix;
            }
            if (col + row) / f < 0.95 * sum {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
    m
}

fn complex_horner(c: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut f = Complex::new(0.0, 0.0);
    let mut df = Complex::new(0.0, 0.0);
    for &coef in c.iter().rev() {
        df = df * z + f;
        f = f * z + coef;
    }
    (f, df)
}

/// Real roots from the eigenvalues of the companion matrix. Exact zero
/// roots are deflated first; eigenvalues are refined by complex Newton steps
/// before their imaginary part is tested against [`IMAG_TOLERANCE`].
pub fn roots_numeric(c: &[f64]) -> Result<Vec<f64>> {
    let Some(top) = c.iter().rposition(|&v| v != 0.0) else {
        return Err(SplineError::Degenerate(
            "all polynomial coefficients are zero".into(),
        ));
    };
    let c = &c[..=top];
    let zeros = c.iter().position(|&v| v != 0.0).unwrap_or(0);
    let mut raw = Vec::new();
    if zeros > 0 {
        raw.push(0.0);
    }
    let reduced = &c[zeros..];
    let n = reduced.len() - 1;
    if n >= 1 {
        let lead = reduced[n];
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -reduced[i] / lead;
        }
        let eig = balance(comp).complex_eigenvalues();
        for z0 in eig.iter() {
            let mut z = *z0;
            for _ in 0..NEWTON_STEPS {
                let (f, df) = complex_horner(reduced, z);
                if df.norm() == 0.0 {
                    break;
                }
                let next = z - f / df;
                if !(complex_horner(reduced, next).0.norm() <= f.norm()) {
                    break;
                }
                z = next;
            }
            if z.im.abs() <= IMAG_TOLERANCE {
                raw.push(z.re);
            }
        }
    }
    Ok(finish(c, raw))
}

/// Minimises one piece over `[0, 1]` with the default root strategy.
pub fn minimize_piece(p: &LocalPolynomial) -> PieceMinimizer {
    minimize_coeffs(p.coeffs(), RootStrategy::Auto)
}

pub fn minimize_piece_with(p: &LocalPolynomial, strategy: RootStrategy) -> PieceMinimizer {
    minimize_coeffs(p.coeffs(), strategy)
}

/// Candidate set is `{0, 1}` plus the stationary points inside `[0, 1]`;
/// the smallest value wins and ties go to the smallest `τ`.
pub(crate) fn minimize_coeffs(b: &[f64], strategy: RootStrategy) -> PieceMinimizer {
    let constant = PieceMinimizer {
        tau: 0.0,
        min_value: b[0],
        method: MinimizerMethod::ConstantPiece,
    };
    if b.len() == 1 {
        return constant;
    }
    let deriv = derivative_monomial_from_slice(b);
    let max_abs = deriv.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs <= FLAT_TOLERANCE {
        return constant;
    }
    let top = deriv
        .iter()
        .rposition(|v| v.abs() > FLAT_TOLERANCE * max_abs)
        .unwrap_or(0);
    let deriv = &deriv[..=top];

    let (roots, method) = match (strategy, top) {
        (_, 0) => (Vec::new(), MinimizerMethod::ClosedForm),
        (RootStrategy::Auto, 1) => (vec![-deriv[0] / deriv[1]], MinimizerMethod::ClosedForm),
        (RootStrategy::Auto, 2) => (
            roots_quadratic([deriv[0], deriv[1], deriv[2]]),
            MinimizerMethod::ClosedForm,
        ),
        (RootStrategy::Auto, 3) => (
            roots_cubic([deriv[0], deriv[1], deriv[2], deriv[3]]),
            MinimizerMethod::ClosedForm,
        ),
        (RootStrategy::Auto, 4) => (
            roots_quartic([deriv[0], deriv[1], deriv[2], deriv[3], deriv[4]]),
            MinimizerMethod::ClosedForm,
        ),
        _ => (
            roots_numeric(deriv).unwrap_or_default(),
            MinimizerMethod::CompanionMatrix,
        ),
    };

    let mut candidates = [0.0f64; 2 + crate::bezier::MAX_DEGREE];
    candidates[1] = 1.0;
    let mut count = 2;
    for r in roots {
        if (-INTERVAL_SLACK..=1.0 + INTERVAL_SLACK).contains(&r) && count < candidates.len() {
            candidates[count] = r.clamp(0.0, 1.0);
            count += 1;
        }
    }
    let candidates = &mut candidates[..count];
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut values = [0.0f64; 2 + crate::bezier::MAX_DEGREE];
    let mut best = f64::INFINITY;
    for (slot, &t) in values.iter_mut().zip(candidates.iter()) {
        *slot = de_casteljau(b, t);
        best = best.min(*slot);
    }
    let chosen = candidates
        .iter()
        .zip(values.iter())
        .find(|(_, &v)| v <= best + TIE_TOLERANCE)
        .map(|(&t, &v)| (t, v))
        .unwrap_or((0.0, b[0]));
    PieceMinimizer {
        tau: chosen.0,
        min_value: chosen.1,
        method,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close_sets(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len(), "got {got:?}, want {want:?}");
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn quadratic_examples() {
        close_sets(&roots_quadratic([-1.0, 0.0, 1.0]), &[-1.0, 1.0], 1e-15);
        close_sets(&roots_quadratic([0.0, 0.0, 1.0]), &[0.0], 0.0);
        assert!(roots_quadratic([1.0, 0.0, 1.0]).is_empty());
        close_sets(&roots_quadratic([2.0, -4.0, 0.0]), &[0.5], 0.0);
        assert!(roots_quadratic([1.0, 0.0, 0.0]).is_empty());
    }

    #[test]
    fn cubic_examples() {
        close_sets(
            &roots_cubic([0.0, -1.0, 0.0, 1.0]),
            &[-1.0, 0.0, 1.0],
            1e-14,
        );
        close_sets(&roots_cubic([0.0, 0.0, 0.0, 1.0]), &[0.0], 0.0);
        // (x - 1)^2 (x + 2)
        close_sets(&roots_cubic([2.0, -3.0, 0.0, 1.0]), &[-2.0, 1.0], 1e-7);
        close_sets(&roots_cubic([-1.0, 0.0, 1.0, 0.0]), &[-1.0, 1.0], 1e-15);
    }

    #[test]
    fn quartic_examples() {
        close_sets(
            &roots_quartic([-1.0, 0.0, 0.0, 0.0, 1.0]),
            &[-1.0, 1.0],
            1e-14,
        );
        close_sets(
            &roots_quartic([1.0, 0.0, -2.0, 0.0, 1.0]),
            &[-1.0, 1.0],
            1e-7,
        );
        // (x-1)(x-2)(x-3)(x-4) = x^4 - 10x^3 + 35x^2 - 50x + 24
        close_sets(
            &roots_quartic([24.0, -50.0, 35.0, -10.0, 1.0]),
            &[1.0, 2.0, 3.0, 4.0],
            1e-12,
        );
        assert!(roots_quartic([1.0, 0.0, 0.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn numeric_examples() {
        close_sets(
            &roots_numeric(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            &[0.0],
            0.0,
        );
        assert!(matches!(
            roots_numeric(&[0.0, 0.0, 0.0]),
            Err(SplineError::Degenerate(_))
        ));
        close_sets(&roots_numeric(&[-2.0, 1.0]).unwrap(), &[2.0], 1e-15);
    }

    #[test]
    fn minimize_symmetric_cubic() {
        let p = LocalPolynomial::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = minimize_piece(&p);
        assert!((m.tau - 0.5).abs() < 1e-14);
        assert!((m.min_value - 0.25).abs() < 1e-15);
        assert_eq!(m.method, MinimizerMethod::ClosedForm);
    }

    #[test]
    fn minimize_monotone_piece() {
        let p = LocalPolynomial::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        let m = minimize_piece(&p);
        assert_eq!(m.tau, 0.0);
        assert_eq!(m.min_value, 0.0);
    }

    #[test]
    fn minimize_constant_piece() {
        let p = LocalPolynomial::new(vec![0.3; 5]).unwrap();
        let m = minimize_piece(&p);
        assert_eq!(m.tau, 0.0);
        assert_eq!(m.method, MinimizerMethod::ConstantPiece);
    }

    #[test]
    fn tie_prefers_smallest_tau() {
        // (1-τ)^3 + τ^3 mirrored so both endpoints tie at 0
        let p = LocalPolynomial::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let m = minimize_piece(&p);
        assert_eq!(m.tau, 0.0);
        assert_eq!(m.min_value, 0.0);
    }

    #[test]
    fn companion_strategy_agrees_on_low_degree() {
        let p = LocalPolynomial::new(vec![0.4, -0.3, 0.2, -0.1, 0.5]).unwrap();
        let a = minimize_piece_with(&p, RootStrategy::Auto);
        let b = minimize_piece_with(&p, RootStrategy::Companion);
        assert_eq!(b.method, MinimizerMethod::CompanionMatrix);
        assert!((a.min_value - b.min_value).abs() < 1e-12);
        assert!((a.tau - b.tau).abs() < 1e-8);
    }
}
