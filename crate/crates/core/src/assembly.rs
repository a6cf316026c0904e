//! Problem matrices for spline smoothing.
//!
//! * `A` maps coefficients to spline values at the sample abscissae.
//! * `Q` is the Gram matrix of the second-derivative energy, so that
//!   `bᵀQb = ∫ |s''(x)|² dx`.
//! * `H` collects the first- and second-derivative continuity conditions at
//!   interior knots; `Hb = 0` exactly when the spline is `C²`.
//! * `G` stacks Bernstein basis rows `g_τ` at the cut points of a [`CutSet`].

use serde::{Deserialize, Serialize};

use crate::bezier::{binomial, validate_degree, Partition};
use crate::data::Dataset;
use crate::error::{Result, SplineError};
use crate::qp::QpProblem;
use crate::sparse::SparseMatrix;

/// Cut points closer than this to an existing one are treated as duplicates.
pub const DUPLICATE_CUT_TOLERANCE: f64 = 1e-12;

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

/// Exact `(2d − 3)! · q^{k,l}_{v,w}`, the Gram entry of the second-difference
/// Bernstein basis before the common factor `1 / (2d − 3)!`. Zero outside the
/// index guard `k ∈ [v, d+v−2]`, `l ∈ [w, d+w−2]`.
fn q_entry_scaled(d: usize, k: usize, l: usize, v: usize, w: usize) -> i128 {
    if k < v || k > d + v - 2 || l < w || l > d + w - 2 {
        return 0;
    }
    let i = k - v;
    let j = l - w;
    let numerator = factorial(d) * factorial(d) * factorial(2 * d - 4 - i - j) * factorial(i + j);
    let denominator = factorial(d - 2 - i) * factorial(i) * factorial(d - 2 - j) * factorial(j);
    debug_assert_eq!(numerator % denominator, 0);
    numerator / denominator
}

/// Dense `(d+1)×(d+1)` energy block of one piece on a unit-width interval.
pub fn q_block(d: usize) -> Result<Vec<Vec<f64>>> {
    validate_degree(d)?;
    const E: [i128; 3] = [1, -2, 1];
    let denom = factorial(2 * d - 3) as f64;
    let mut block = vec![vec![0.0; d + 1]; d + 1];
    for k in 0..=d {
        for l in 0..=d {
            let mut acc: i128 = 0;
            for v in 0..3 {
                for w in 0..3 {
                    acc += E[v] * E[w] * q_entry_scaled(d, k, l, v, w);
                }
            }
            block[k][l] = acc as f64 / denom;
        }
    }
    Ok(block)
}

/// Bernstein basis row `g_τ` of degree `d`.
pub fn g_tau(tau: f64, d: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(SplineError::Domain {
            what: "tau",
            value: tau,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(bernstein_row(tau, d))
}

pub(crate) fn bernstein_row(tau: f64, d: usize) -> Vec<f64> {
    let s = 1.0 - tau;
    (0..=d)
        .map(|k| binomial(d, k) as f64 * s.powi((d - k) as i32) * tau.powi(k as i32))
        .collect()
}

pub fn build_a(dataset: &Dataset, partition: &Partition, d: usize) -> Result<SparseMatrix> {
    validate_degree(d)?;
    let mut rows = Vec::with_capacity(dataset.len());
    for &x in dataset.x() {
        let (piece, tau) = partition.locate(x)?;
        let cols: Vec<usize> = (d * piece..=d * piece + d).collect();
        rows.push((cols, bernstein_row(tau, d)));
    }
    Ok(SparseMatrix::from_rows(d * partition.intervals() + 1, rows))
}

pub fn build_q(partition: &Partition, d: usize) -> Result<SparseMatrix> {
    let block = q_block(d)?;
    let n = d * partition.intervals() + 1;
    let mut trip = Vec::with_capacity(partition.intervals() * (d + 1) * (d + 1));
    for (i, &width) in partition.widths().iter().enumerate() {
        let scale = 1.0 / (width * width * width);
        for k in 0..=d {
            for l in 0..=d {
                trip.push((d * i + k, d * i + l, block[k][l] * scale));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, &trip))
}

/// Continuity matrix with rows ordered (knot 1, l=1), (knot 1, l=2),
/// (knot 2, l=1), …
pub fn build_h(partition: &Partition, d: usize) -> Result<SparseMatrix> {
    validate_degree(d)?;
    let m = partition.intervals();
    let n = d * m + 1;
    let widths = partition.widths();
    let mut trip = Vec::with_capacity(4 * (m.saturating_sub(1)) * 3);
    let mut row = 0;
    for knot in 1..m {
        let left = widths[knot - 1];
        let right = widths[knot];
        let centre = d * knot;
        for l in 1..=2usize {
            let left_scale = left.powi(l as i32).recip();
            let right_scale = right.powi(l as i32).recip();
            for k in 0..=l {
                let sign = if (l - k) % 2 == 0 { 1.0 } else { -1.0 };
                let c = sign * binomial(l, k) as f64;
                trip.push((row, centre + k - l, c * left_scale));
                trip.push((row, centre + k, -c * right_scale));
            }
            row += 1;
        }
    }
    Ok(SparseMatrix::from_triplets(row, n, &trip))
}

/// Per-interval sets of cut points `τ ∈ [0, 1]`, kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutSet {
    points: Vec<Vec<f64>>,
}

impl CutSet {
    pub fn new(intervals: usize) -> Self {
        Self {
            points: vec![Vec::new(); intervals],
        }
    }

    pub fn intervals(&self) -> usize {
        self.points.len()
    }

    pub fn interval(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn total(&self) -> usize {
        self.points.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Whether `tau` lies within [`DUPLICATE_CUT_TOLERANCE`] of a cut of
    /// interval `i`.
    pub fn has_near(&self, i: usize, tau: f64) -> bool {
        self.points[i]
            .iter()
            .any(|&t| (t - tau).abs() <= DUPLICATE_CUT_TOLERANCE)
    }

    /// Adds `tau` to interval `i`. Returns `false` (and leaves the set
    /// unchanged) for near-duplicates.
    pub fn insert(&mut self, i: usize, tau: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(SplineError::Domain {
                what: "tau",
                value: tau,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.has_near(i, tau) {
            return Ok(false);
        }
        let pos = self.points[i].partition_point(|&t| t < tau);
        self.points[i].insert(pos, tau);
        Ok(true)
    }

    /// `self ⊆ other`, interval by interval.
    pub fn is_subset_of(&self, other: &CutSet) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.iter().all(|t| b.contains(t)))
    }

    /// `(interval, τ)` pairs in row order of [`build_g`].
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.points
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |&t| (i, t)))
    }
}

/// One row `g_τ` per cut, placed on the columns of its piece.
pub fn build_g(cuts: &CutSet, d: usize, m: usize) -> Result<SparseMatrix> {
    if cuts.intervals() != m {
        return Err(SplineError::Dimension(format!(
            "cut set has {} intervals, expected {m}",
            cuts.intervals()
        )));
    }
    let rows = cuts
        .iter()
        .map(|(i, t)| ((d * i..=d * i + d).collect(), bernstein_row(t, d)));
    Ok(SparseMatrix::from_rows(d * m + 1, rows))
}

/// Uniform τ-grid constraint rows, `points` per interval.
pub(crate) fn build_grid_rows(d: usize, m: usize, points: usize) -> SparseMatrix {
    let taus: Vec<Vec<f64>> = (0..points)
        .map(|j| bernstein_row(j as f64 / (points - 1) as f64, d))
        .collect();
    let rows = (0..m).flat_map(|i| {
        taus.iter()
            .map(move |g| ((d * i..=d * i + d).collect(), g.clone()))
    });
    SparseMatrix::from_rows(d * m + 1, rows)
}

/// Fidelity, roughness and continuity matrices for one dataset, partition
/// and degree.
#[derive(Debug, Clone)]
pub struct ProblemMatrices {
    pub a: SparseMatrix,
    pub q: SparseMatrix,
    pub h: SparseMatrix,
    pub y: Vec<f64>,
    pub degree: usize,
    pub partition: Partition,
}

impl ProblemMatrices {
    pub fn assemble(dataset: &Dataset, partition: &Partition, d: usize) -> Result<Self> {
        Ok(Self {
            a: build_a(dataset, partition, d)?,
            q: build_q(partition, d)?,
            h: build_h(partition, d)?,
            y: dataset.y().to_vec(),
            degree: d,
            partition: partition.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn intervals(&self) -> usize {
        self.partition.intervals()
    }

    /// `‖y − Ab‖² + λ bᵀQb`
    pub fn cost(&self, b: &[f64], lambda: f64) -> f64 {
        let fit: f64 = self
            .a
            .mul_vec(b)
            .iter()
            .zip(&self.y)
            .map(|(s, y)| (y - s) * (y - s))
            .sum();
        fit + lambda * self.q.quad_form(b)
    }

    /// `2Aᵀ(Ab − y) + 2λQb`
    pub fn gradient(&self, b: &[f64], lambda: f64) -> Vec<f64> {
        let resid: Vec<f64> = self
            .a
            .mul_vec(b)
            .iter()
            .zip(&self.y)
            .map(|(s, y)| 2.0 * (s - y))
            .collect();
        let mut g = self.a.tmul_vec(&resid);
        let qb = self.q.mul_vec(b);
        g.iter_mut()
            .zip(qb)
            .for_each(|(gi, qi)| *gi += 2.0 * lambda * qi);
        g
    }

    /// Hessian `2(AᵀA + λQ)` as triplets.
    fn hessian(&self, lambda: f64) -> SparseMatrix {
        let n = self.dim();
        let mut trip = self.a.gram_triplets();
        trip.extend(
            self.q
                .triplets()
                .into_iter()
                .map(|(r, c, v)| (r, c, lambda * v)),
        );
        trip.iter_mut().for_each(|t| t.2 *= 2.0);
        SparseMatrix::from_triplets(n, n, &trip)
    }

    /// The smoothing QP `min f(b)` s.t. `Hb = 0`, `Cb ≥ 0`, written as
    /// `½bᵀPb + qᵀb + const` so that its objective equals `f` exactly.
    pub fn qp(&self, lambda: f64, inequalities: SparseMatrix) -> Result<QpProblem> {
        let n = self.dim();
        let linear: Vec<f64> = self.a.tmul_vec(&self.y).iter().map(|v| -2.0 * v).collect();
        let constant = self.y.iter().map(|v| v * v).sum();
        let rows = inequalities.nrows();
        QpProblem::new(
            self.hessian(lambda),
            linear,
            self.h.clone(),
            vec![0.0; self.h.nrows()],
            inequalities,
            vec![0.0; rows],
        )
        .map(|p| p.with_constant(constant))
        .and_then(|p| {
            if p.dim() == n {
                Ok(p)
            } else {
                Err(SplineError::Dimension("inequality width".into()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bezier::{de_casteljau, SplineCoefficients};

    #[test]
    fn cubic_energy_of_x_cubed() {
        // p(x) = x³ on [0, 1]: ∫ (6x)² dx = 12
        let part = Partition::integers(1).unwrap();
        let q = build_q(&part, 3).unwrap();
        let b = [0.0, 0.0, 0.0, 1.0];
        assert!((q.quad_form(&b) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn q_is_symmetric() {
        let part = Partition::new(vec![0.0, 0.3, 1.0, 2.5]).unwrap();
        for d in 3..=10 {
            let q = build_q(&part, d).unwrap().to_dense();
            assert_eq!(q, q.transpose());
        }
    }

    #[test]
    fn affine_and_constant_have_zero_energy() {
        let part = Partition::new(vec![0.0, 0.5, 2.0, 2.25]).unwrap();
        for d in 3..=10 {
            let q = build_q(&part, d).unwrap();
            let constant = vec![1.7; 3 * d + 1];
            assert!(q.quad_form(&constant).abs() < 1e-9);
            // Bernstein coefficients of x on [ξ_i, ξ_{i+1}] are ξ_i + kΔ/d
            let mut b = vec![0.0; 3 * d + 1];
            for (i, (&k0, &w)) in part.knots().iter().zip(part.widths()).enumerate() {
                for k in 0..=d {
                    b[d * i + k] = k0 + w * k as f64 / d as f64;
                }
            }
            assert!(q.quad_form(&b).abs() < 1e-8, "d={d} {}", q.quad_form(&b));
        }
    }

    #[test]
    fn tent_kink_violates_first_derivative_row() {
        let part = Partition::integers(2).unwrap();
        let h = build_h(&part, 3).unwrap();
        assert_eq!(h.nrows(), 2);
        let b = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
        let hb = h.mul_vec(&b);
        assert!((hb[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn a_rows_at_knots_are_unit() {
        let ds = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4]).unwrap();
        let part = ds.knot_partition().unwrap();
        let a = build_a(&ds, &part, 4).unwrap();
        for (j, &x) in ds.x().iter().enumerate() {
            let (cols, vals) = a.row(j);
            let ones: Vec<usize> = cols
                .iter()
                .zip(vals)
                .filter(|(_, &v)| v != 0.0)
                .map(|(&c, _)| c)
                .collect();
            assert_eq!(ones, vec![4 * x as usize]);
        }
        let all_ones = vec![1.0; 13];
        assert!(a.mul_vec(&all_ones).iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn a_rejects_samples_outside_partition() {
        let ds = Dataset::new(vec![0.0, 5.0], vec![1.0, 1.0]).unwrap();
        let part = Partition::integers(3).unwrap();
        assert!(matches!(
            build_a(&ds, &part, 3),
            Err(SplineError::Domain { .. })
        ));
    }

    #[test]
    fn g_tau_examples() {
        assert_eq!(g_tau(0.0, 5).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g_tau(0.5, 3).unwrap(), vec![0.125, 0.375, 0.375, 0.125]);
        let s: f64 = g_tau(0.37, 7).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(g_tau(1.2, 3).is_err());
    }

    #[test]
    fn g_matrix_shapes() {
        let empty = CutSet::new(4);
        assert_eq!(build_g(&empty, 3, 4).unwrap().nrows(), 0);
        let mut cuts = CutSet::new(4);
        cuts.insert(0, 0.0).unwrap();
        let g = build_g(&cuts, 3, 4).unwrap().to_dense();
        assert_eq!(g.nrows(), 1);
        let row: Vec<f64> = g.row(0).iter().copied().collect();
        let mut want = vec![0.0; 13];
        want[0] = 1.0;
        assert_eq!(row, want);
    }

    #[test]
    fn g_rows_evaluate_pieces() {
        let part = Partition::integers(3).unwrap();
        let b: Vec<f64> = (0..13).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let s = SplineCoefficients::new(4, part, b.clone()).unwrap();
        let mut cuts = CutSet::new(3);
        for (i, t) in [(2, 0.9), (0, 0.25), (2, 0.1), (1, 1.0)] {
            assert!(cuts.insert(i, t).unwrap());
        }
        assert!(!cuts.insert(2, 0.1 + 1e-13).unwrap());
        let gb = build_g(&cuts, 4, 3).unwrap().mul_vec(&b);
        let expected: Vec<f64> = cuts
            .iter()
            .map(|(i, t)| de_casteljau(s.piece_coeffs(i), t))
            .collect();
        assert_eq!(gb.len(), 4);
        for (g, e) in gb.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn cut_set_grows_monotonically() {
        let mut a = CutSet::new(2);
        a.insert(1, 0.5).unwrap();
        let mut b = a.clone();
        b.insert(1, 0.25).unwrap();
        b.insert(0, 0.75).unwrap();
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert_eq!(b.interval(1), &[0.25, 0.5]);
        assert!(b.insert(0, -0.1).is_err());
    }
}
