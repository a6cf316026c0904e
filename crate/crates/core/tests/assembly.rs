mod common;

use common::*;
use nalgebra::DVector;
use nnspline::assembly::*;
use nnspline::bezier::*;
use nnspline::convexity::null_space_basis;
use nnspline::data::Dataset;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn fidelity_rows_match_monomial_evaluation() {
    let mut rng = rng(11);
    for case in 0..50 {
        let d = 3 + case % 8;
        let part = random_partition(&mut rng, 1 + case % 6);
        let b = random_coeffs(&mut rng, d * part.intervals() + 1);
        let mut x: Vec<f64> = (0..15)
            .map(|_| rng.random_range(part.start()..part.end()))
            .chain(part.knots().iter().copied())
            .collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        x.dedup();
        let ds = Dataset::new(x.clone(), vec![0.0; x.len()]).unwrap();
        let ab = build_a(&ds, &part, d).unwrap().mul_vec(&b);
        let s = SplineCoefficients::new(d, part.clone(), b.clone()).unwrap();
        for (xi, v) in x.iter().zip(&ab) {
            let (i, t) = part.locate(*xi).unwrap();
            let mono = bernstein_to_monomial(&b[d * i..=d * i + d]);
            // the expanded power form cancels terms of size up to C(d, d/2)²
            assert!((v - poly_eval(&mono, t)).abs() <= 1e-10);
            assert!((v - s.evaluate(*xi).unwrap()).abs() <= 1e-12);
        }
    }
}

#[test]
fn knot_rows_are_unit_vectors() {
    let part = Partition::new(vec![0.0, 0.5, 2.0, 3.0]).unwrap();
    let ds = Dataset::new(part.knots().to_vec(), vec![0.0; 4]).unwrap();
    let a = build_a(&ds, &part, 4).unwrap();
    for j in 0..4 {
        let (cols, vals) = a.row(j);
        for (&c, &v) in cols.iter().zip(vals) {
            assert_eq!(v, if c == 4 * j { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(a.mul_vec(&[1.0; 13]), vec![1.0; 4]);
}

#[test]
fn energy_matches_quadrature() {
    let mut rng = rng(12);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let d = 3 + case % 6;
        let part = random_partition(&mut rng, 1 + case % 5);
        let b = random_coeffs(&mut rng, d * part.intervals() + 1);
        let exact = build_q(&part, d).unwrap().quad_form(&b);
        let quad = energy_by_quadrature(&b, d, part.widths());
        worst = worst.max((exact - quad).abs() / quad.abs().max(1e-300));
    }
    assert!(worst <= 1e-9, "worst relative error {worst:e}");
}

#[test]
fn energy_of_affine_and_constant_is_zero() {
    let mut rng = rng(13);
    for d in 3..=10 {
        let part = random_partition(&mut rng, 4);
        let q = build_q(&part, d).unwrap();
        let affine = global_polynomial_pieces(&[0.7, -1.3], d, &part);
        assert!(q.quad_form(&affine).abs() < 1e-9);
        assert!(q.quad_form(&vec![3.0; d * 4 + 1]).abs() < 1e-9);
        let dense = q.to_dense();
        assert_eq!(dense, dense.transpose());
    }
}

#[test]
fn global_polynomials_satisfy_continuity() {
    let mut rng = rng(14);
    for case in 0..50 {
        let d = 3 + case % 8;
        let part = small_partition(&mut rng, 2 + case % 5);
        let c = random_coeffs(&mut rng, d + 1);
        let b = global_polynomial_pieces(&c, d, &part);
        let s = SplineCoefficients::new(d, part.clone(), b.clone()).unwrap();
        for _ in 0..5 {
            let x = rng.random_range(part.start()..part.end());
            assert!((s.evaluate(x).unwrap() - poly_eval(&c, x)).abs() < 1e-8);
        }
        let hb = build_h(&part, d).unwrap().mul_vec(&b);
        let worst = hb.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 1e-10, "‖Hb‖ = {worst:e}");
    }
}

#[test]
fn tent_violates_first_derivative_row() {
    let part = Partition::integers(2).unwrap();
    let b = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
    let hb = build_h(&part, 3).unwrap().mul_vec(&b);
    // (b₃ − b₂)/Δ − (b₄ − b₃)/Δ = 1/3 + 1/3
    assert!((hb[0] - 2.0 / 3.0).abs() < 1e-15);
    assert!(hb[1].abs() < 1e-15);
}

#[test]
fn null_space_projection_gives_smooth_splines() {
    let mut rng = rng(15);
    for case in 0..10 {
        let d = 3 + case % 4;
        let part = random_partition(&mut rng, 4);
        let h = build_h(&part, d).unwrap();
        let ns = null_space_basis(&h);
        assert_eq!(ns.basis.ncols(), d * 4 + 1 - 2 * 3);
        assert!(!ns.rank_deficient);
        let b0 = DVector::from_vec(random_coeffs(&mut rng, d * 4 + 1));
        let v = &ns.basis;
        let b = v * (v.transpose() * &b0);
        let b: Vec<f64> = b.iter().copied().collect();
        let hb = h.mul_vec(&b);
        assert!(hb.iter().all(|r| r.abs() <= 1e-12));
        let s = SplineCoefficients::new(d, part.clone(), b).unwrap();
        // first derivatives by one-sided differences, second derivatives
        // exactly from the power form of the neighbouring pieces
        let f = |x: f64| s.evaluate(x).unwrap();
        let eps = 1e-6;
        for k in 1..4 {
            let xk = part.knots()[k];
            let left1 = (f(xk) - f(xk - eps)) / eps;
            let right1 = (f(xk + eps) - f(xk)) / eps;
            assert!(
                (left1 - right1).abs() < 1e-3 * (1.0 + left1.abs()),
                "{left1} {right1}"
            );
            let (wl, wr) = (part.widths()[k - 1], part.widths()[k]);
            let bl = bernstein_to_monomial(s.piece_coeffs(k - 1));
            let br = bernstein_to_monomial(s.piece_coeffs(k));
            let l2 = poly_eval(&poly_derivative(&poly_derivative(&bl)), 1.0) / (wl * wl);
            let r2 = poly_eval(&poly_derivative(&poly_derivative(&br)), 0.0) / (wr * wr);
            assert!((l2 - r2).abs() < 1e-8 * (1.0 + l2.abs()), "{l2} {r2}");
        }
    }
}

#[test]
fn cut_rows_evaluate_pieces() {
    let mut rng = rng(16);
    let d = 5;
    let m = 4;
    let b = random_coeffs(&mut rng, d * m + 1);
    let mut cuts = CutSet::new(m);
    for _ in 0..12 {
        cuts.insert(rng.random_range(0..m), rng.random_range(0.0..1.0))
            .unwrap();
    }
    let g = build_g(&cuts, d, m).unwrap();
    assert_eq!(g.nrows(), cuts.total());
    for ((i, t), v) in cuts.iter().zip(g.mul_vec(&b)) {
        let mono = bernstein_to_monomial(&b[d * i..=d * i + d]);
        assert!((v - poly_eval(&mono, t)).abs() <= 1e-12);
    }
    let empty = build_g(&CutSet::new(m), d, m).unwrap();
    assert_eq!(empty.nrows(), 0);
    let mut one = CutSet::new(m);
    one.insert(0, 0.0).unwrap();
    let g = build_g(&one, 3, m).unwrap();
    assert_eq!(
        g.to_dense().row(0).iter().copied().collect::<Vec<_>>()[..5],
        [1.0, 0.0, 0.0, 0.0, 0.0]
    );
}

#[test]
fn cut_set_grows_monotonically() {
    let mut cuts = CutSet::new(2);
    let before = cuts.clone();
    assert!(cuts.insert(1, 0.4).unwrap());
    assert!(!cuts.insert(1, 0.4 + 1e-13).unwrap());
    assert!(cuts.insert(1, 0.1).unwrap());
    assert!(before.is_subset_of(&cuts));
    assert_eq!(cuts.interval(1), &[0.1, 0.4]);
    assert!(cuts.insert(0, 1.5).is_err());
}

#[test]
fn degree_elevation_keeps_costs() {
    let mut rng = rng(17);
    for case in 0..30 {
        let d = 3 + case % 7;
        let part = random_partition(&mut rng, 3);
        let b = random_coeffs(&mut rng, d * 3 + 1);
        let x: Vec<f64> = (0..=12)
            .map(|k| part.start() + (part.end() - part.start()) * k as f64 / 12.0)
            .collect();
        let y: Vec<f64> = (0..=12).map(|_| rng.random_range(0.0..1.0)).collect();
        let ds = Dataset::new(x, y).unwrap();
        let s = SplineCoefficients::new(d, part.clone(), b).unwrap();
        let up = s.elevate_degree().unwrap();
        let pm = ProblemMatrices::assemble(&ds, &part, d).unwrap();
        let pm_up = ProblemMatrices::assemble(&ds, &part, d + 1).unwrap();
        let lam = 0.37;
        let c0 = pm.cost(s.coeffs(), lam);
        let c1 = pm_up.cost(up.coeffs(), lam);
        assert!((c0 - c1).abs() <= 1e-9 * (1.0 + c0.abs()), "{c0} {c1}");
        let e0 = pm.q.quad_form(s.coeffs());
        let e1 = pm_up.q.quad_form(up.coeffs());
        assert!((e0 - e1).abs() <= 1e-9 * (1.0 + e0.abs()));
    }
}

#[test]
fn nonnegative_coefficients_give_nonnegative_splines() {
    let mut rng = rng(18);
    for case in 0..50 {
        let d = 3 + case % 8;
        let b: Vec<f64> = (0..=d).map(|_| rng.random_range(0.0..1.0)).collect();
        assert!(grid_minimum(&b, 10_001).0 >= -1e-12);
    }
}

proptest! {
    #[test]
    fn g_tau_is_a_partition_of_unity(t in 0.0f64..=1.0, d in 3usize..=10) {
        let g = g_tau(t, d).unwrap();
        prop_assert!((g.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(g.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn energy_is_nonnegative(b in prop::collection::vec(-10.0f64..10.0, 13)) {
        let part = Partition::new(vec![0.0, 0.4, 1.9, 2.5]).unwrap();
        prop_assert!(build_q(&part, 4).unwrap().quad_form(&b) >= -1e-10);
    }
}
