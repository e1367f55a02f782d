use nalgebra::{dmatrix, DMatrix};

use super::*;

fn unit() -> Interval {
    Interval::unit()
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn interval_rejects_reversed_bounds() {
    assert!(Interval::new(1.0, -1.0).is_err());
    assert!(Interval::new(0.0, 0.0).is_err());
}

#[test]
fn fit_constant_is_degree_zero() {
    let m = fit(unit(), 1e-12, |_| scalar(1.0)).unwrap();
    assert_eq!(m.degree(), 0);
    assert_eq!(m.eval(0.3).unwrap()[(0, 0)], 1.0);
}

#[test]
fn fit_square_is_exact_degree_two() {
    let m = fit(unit(), 1e-12, |t| scalar(t * t)).unwrap();
    assert_eq!(m.degree(), 2);
    assert!((m.eval(0.5).unwrap()[(0, 0)] - 0.25).abs() < 1e-15);
}

#[test]
fn fit_exp_matches_direct_evaluation() {
    let m = fit(unit(), 1e-10, |t| scalar(t.exp())).unwrap();
    assert!((m.eval(0.0).unwrap()[(0, 0)] - 1.0).abs() < 1e-10);
    assert!((m.eval(0.3).unwrap()[(0, 0)] - 0.3_f64.exp()).abs() < 1e-10);
}

#[test]
fn fit_reports_non_convergence() {
    let err = fit(unit(), 1e-12, |t| scalar(t.abs().sqrt())).unwrap_err();
    assert!(matches!(err, Error::NonConvergence(_)));
}

#[test]
fn eval_outside_interval_is_domain_error() {
    let m = MatrixFunction::identity(2, unit());
    assert!(matches!(m.eval(1.5), Err(Error::Domain { .. })));
    assert_eq!(m.eval(-0.7).unwrap(), DMatrix::<f64>::identity(2, 2));
}

#[test]
fn linear_function_evaluates() {
    let ti = MatrixFunction::linear(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), unit());
    assert!((ti.eval(0.5).unwrap() - DMatrix::<f64>::identity(2, 2) * 0.5).norm() < 1e-15);
    let shifted = Interval::new(2.0, 5.0).unwrap();
    let ts = MatrixFunction::linear(scalar(1.0), scalar(0.0), shifted);
    assert!((ts.eval(4.2).unwrap()[(0, 0)] - 4.2).abs() < 1e-14);
}

#[test]
fn derivative_of_constant_and_linear() {
    let c = MatrixFunction::constant(dmatrix![1.0, 2.0; 3.0, 4.0], unit());
    assert_eq!(
        c.derivative().eval(0.1).unwrap(),
        DMatrix::<f64>::zeros(2, 2)
    );
    let ti = MatrixFunction::linear(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), unit());
    assert!((ti.derivative().eval(0.9).unwrap() - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
}

#[test]
fn derivative_of_cube_matches_finite_difference() {
    let m = fit(unit(), 1e-12, |t| scalar(t * t * t)).unwrap();
    let d = m.derivative().eval(0.4).unwrap()[(0, 0)];
    assert!((d - 0.48).abs() < 1e-9);
    let h = 1e-5;
    let fd = (m.eval(0.4 + h).unwrap()[(0, 0)] - m.eval(0.4 - h).unwrap()[(0, 0)]) / (2.0 * h);
    assert!((d - fd).abs() < 1e-6);
}

#[test]
fn derivative_respects_interval_scaling() {
    let i = Interval::new(0.0, 4.0).unwrap();
    let m = fit(i, 1e-12, |t| scalar((0.5 * t).sin())).unwrap();
    let d = m.derivative().eval(1.3).unwrap()[(0, 0)];
    assert!((d - 0.5 * (0.65_f64).cos()).abs() < 1e-10);
}

#[test]
fn add_zero_and_square_products() {
    let ti = MatrixFunction::linear(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), unit());
    let z = MatrixFunction::zeros(2, 2, unit());
    assert_eq!(
        ti.add(&z).unwrap().eval(0.3).unwrap(),
        ti.eval(0.3).unwrap()
    );
    let sq = ti.mul(&ti).unwrap();
    assert!((sq.eval(0.5).unwrap() - DMatrix::<f64>::identity(2, 2) * 0.25).norm() < 1e-15);
    assert!(ti.mul(&MatrixFunction::zeros(3, 3, unit())).is_err());
}

#[test]
fn shear_times_inverse_shear_is_identity() {
    let a = fit(unit(), 1e-12, |t| dmatrix![1.0, t; 0.0, 1.0]).unwrap();
    let b = fit(unit(), 1e-12, |t| dmatrix![1.0, -t; 0.0, 1.0]).unwrap();
    let p = a.mul(&b).unwrap();
    for t in grid(unit(), VERIFY_GRID) {
        assert!(max_abs(&(p.eval(t).unwrap() - DMatrix::<f64>::identity(2, 2))) < 1e-10);
    }
}

#[test]
fn inverse_of_identity_and_shear() {
    let i = MatrixFunction::identity(3, unit());
    assert_eq!(
        inverse(&i, 1e-12).unwrap().eval(0.2).unwrap(),
        DMatrix::<f64>::identity(3, 3)
    );
    let a = fit(unit(), 1e-12, |t| dmatrix![1.0, t; 0.0, 1.0]).unwrap();
    let inv = inverse(&a, 1e-12).unwrap();
    for t in grid(unit(), 33) {
        assert!(max_abs(&(inv.eval(t).unwrap() - dmatrix![1.0, -t; 0.0, 1.0])) < 1e-12);
    }
}

#[test]
fn inverse_reports_interior_singularity() {
    let a = fit(unit(), 1e-12, |t| dmatrix![t, 0.0; 0.0, 1.0]).unwrap();
    match inverse(&a, 1e-12) {
        Err(Error::NearSingular { t, sigma }) => {
            assert!(t.abs() < 1e-12);
            assert!(sigma < 1e-12);
        }
        other => panic!("expected near-singular error, got {other:?}"),
    }
}

#[test]
fn inverse_catches_singularity_between_nodes() {
    // det = t - 0.123456 vanishes away from every grid node
    let a = fit(unit(), 1e-12, |t| dmatrix![t - 0.123456, 0.0; 0.0, 1.0]).unwrap();
    match inverse(&a, 1e-12) {
        Err(Error::NearSingular { t, .. }) => assert!((t - 0.123456).abs() < 0.05),
        other => panic!("expected near-singular error, got {other:?}"),
    }
}

#[test]
fn min_singular_examples() {
    let i = MatrixFunction::identity(2, unit());
    assert!((min_singular_on_grid(&i, 33).unwrap().0 - 1.0).abs() < 1e-15);
    let d = fit(unit(), 1e-12, |t| dmatrix![t, 0.0; 0.0, 1.0]).unwrap();
    assert!(min_singular_on_grid(&d, 33).unwrap().0 < 1e-15);
    let s = fit(unit(), 1e-12, |t| dmatrix![1.0, t; 0.0, 1.0]).unwrap();
    let (got, _) = min_singular_on_grid(&s, 33).unwrap();
    // pointwise oracle
    let want = grid(unit(), 33)
        .into_iter()
        .map(|t| dmatrix![1.0, t; 0.0, 1.0].singular_values().min())
        .fold(f64::INFINITY, f64::min);
    assert!(got > 0.0);
    assert!((got - want).abs() < 1e-14);
}

#[test]
fn solve_matches_inverse_product() {
    let a = fit(unit(), 1e-12, |t| dmatrix![2.0 + t, 0.5; 0.1 * t, 3.0]).unwrap();
    let b = fit(unit(), 1e-12, |t| dmatrix![t.sin(); 1.0]).unwrap();
    let x = solve(&a, &b, 1e-12).unwrap();
    for t in grid(unit(), 17) {
        assert!(max_abs(&(a.eval(t).unwrap() * x.eval(t).unwrap() - b.eval(t).unwrap())) < 1e-11);
    }
}

#[test]
fn block_operations_round_trip() {
    let m = fit(unit(), 1e-12, |t| dmatrix![1.0, t, t * t; 2.0, 3.0, t]).unwrap();
    let b = m.block(0, 1, 2, 2);
    assert!(max_abs(&(b.eval(0.5).unwrap() - dmatrix![0.5, 0.25; 3.0, 0.5])) < 1e-14);
    let d =
        MatrixFunction::block_diag(&[&m, &MatrixFunction::identity(1, unit())], unit()).unwrap();
    assert_eq!(d.shape(), (3, 4));
    assert!((d.eval(0.5).unwrap()[(2, 3)] - 1.0).abs() < 1e-14);
    assert!((d.eval(0.5).unwrap()[(0, 1)] - 0.5).abs() < 1e-14);
}

#[test]
fn json_round_trip_preserves_values() {
    let m = fit(
        Interval::new(-2.0, 3.0).unwrap(),
        1e-12,
        |t| dmatrix![t.cos(), 1.0; t, t * t],
    )
    .unwrap();
    let s = serde_json::to_string(&m).unwrap();
    let back: MatrixFunction = serde_json::from_str(&s).unwrap();
    for t in grid(m.interval(), 17) {
        assert!(max_abs(&(back.eval(t).unwrap() - m.eval(t).unwrap())) <= 1e-12);
    }
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["rows"], 2);
    assert_eq!(v["interval"][1], 3.0);
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 4);
}

#[test]
fn json_rejects_wrong_entry_count() {
    let bad = r#"{"rows":2,"cols":2,"interval":[-1,1],"degree":0,"coeffs":[[1.0]]}"#;
    assert!(serde_json::from_str::<MatrixFunction>(bad).is_err());
}

#[test]
fn svd_of_identity_is_trivial() {
    let i = MatrixFunction::identity(3, unit());
    let svd = smooth_svd(&i, 1e-12).unwrap();
    for t in [-1.0, 0.0, 0.4] {
        assert!(max_abs(&(svd.u.eval(t).unwrap() - DMatrix::<f64>::identity(3, 3))) < 1e-12);
        assert!(max_abs(&(svd.v.eval(t).unwrap() - DMatrix::<f64>::identity(3, 3))) < 1e-12);
        assert!(max_abs(&(svd.s.eval(t).unwrap() - DMatrix::<f64>::identity(3, 3))) < 1e-12);
    }
}

#[test]
fn svd_of_column_vector() {
    let m = fit(unit(), 1e-12, |t| dmatrix![2.0 + t; 0.0]).unwrap();
    let svd = smooth_svd(&m, 1e-12).unwrap();
    assert_eq!(svd.rank, 1);
    for t in grid(unit(), 9) {
        let s = svd.s.eval(t).unwrap();
        assert!((s[(0, 0)] - (2.0 + t)).abs() < 1e-11);
        let u = svd.u.eval(t).unwrap();
        assert!((u[(0, 0)].abs() - 1.0).abs() < 1e-11);
        assert!(u[(1, 0)].abs() < 1e-11);
    }
}

#[test]
fn svd_rotates_bottom_rank_to_top() {
    let m = fit(unit(), 1e-12, |t| dmatrix![0.0; 2.0 + t]).unwrap();
    let svd = smooth_svd(&m, 1e-12).unwrap();
    let u = svd.u.eval(0.3).unwrap();
    assert!((u[(1, 0)].abs() - 1.0).abs() < 1e-12);
    let r = u.transpose() * m.eval(0.3).unwrap();
    assert!((r[(0, 0)].abs() - 2.3).abs() < 1e-12);
    assert!(r[(1, 0)].abs() < 1e-12);
}

#[test]
fn svd_follows_branches_through_crossing() {
    let m = fit(unit(), 1e-12, |t| dmatrix![2.0 + t, 0.0; 0.0, 2.0 - t]).unwrap();
    let svd = smooth_svd(&m, 1e-12).unwrap();
    let res = svd.residuals(&m, VERIFY_GRID);
    assert!(res.orthogonality_u < 1e-9 && res.orthogonality_v < 1e-9 && res.reconstruction < 1e-9);
    // continuity: neighbouring values on a fine grid never jump
    let ts: Vec<f64> = (0..=400).map(|k| -1.0 + k as f64 / 200.0).collect();
    for w in ts.windows(2) {
        let du = max_abs(&(svd.u.eval(w[1]).unwrap() - svd.u.eval(w[0]).unwrap()));
        let ds = max_abs(&(svd.s.eval(w[1]).unwrap() - svd.s.eval(w[0]).unwrap()));
        assert!(du < 1e-6, "U jumps by {du} near {}", w[0]);
        assert!(ds < 0.011, "S jumps by {ds} near {}", w[0]);
    }
    // ordered descending at the left end, then carried across the crossing
    let s = svd.s.eval(-0.5).unwrap();
    assert!((s[(0, 0)] - 2.5).abs() < 1e-11 && (s[(1, 1)] - 1.5).abs() < 1e-11);
    let s = svd.s.eval(0.5).unwrap();
    assert!((s[(0, 0)] - 1.5).abs() < 1e-11 && (s[(1, 1)] - 2.5).abs() < 1e-11);
}

#[test]
fn svd_tracks_rotating_factors() {
    // M = Q(t) diag(3 + t, 1) W(t)^T with smooth rotations
    let m = fit(unit(), 1e-13, |t| {
        let (a, b) = (0.7 * t, -0.4 * t + 0.2);
        let q = dmatrix![a.cos(), -a.sin(); a.sin(), a.cos()];
        let w = dmatrix![b.cos(), -b.sin(); b.sin(), b.cos()];
        q * dmatrix![3.0 + t, 0.0; 0.0, 1.0] * w.transpose()
    })
    .unwrap();
    let svd = smooth_svd(&m, 1e-12).unwrap();
    let res = svd.residuals(&m, VERIFY_GRID);
    assert!(res.reconstruction < 1e-9, "{res:?}");
    let u = svd.u.eval(0.5).unwrap();
    assert!((u[(0, 0)].abs() - (0.35_f64).cos()).abs() < 1e-10);
}

#[test]
fn svd_rank_change_is_reported() {
    let m = fit(unit(), 1e-12, |t| dmatrix![t; 1.0; 0.0]).unwrap();
    assert!(smooth_svd(&m, 1e-12).is_ok());
    let bad = fit(unit(), 1e-12, |t| dmatrix![t, 0.0; 0.0, 1.0]).unwrap();
    assert!(matches!(
        smooth_svd(&bad, 1e-12),
        Err(Error::ConstantRank { .. })
    ));
}

#[test]
fn svd_of_wide_block_has_smooth_null_space() {
    let m = fit(unit(), 1e-12, |t| {
        let a = 0.3 * t;
        dmatrix![1.0 + 0.2 * t, 0.5, 0.0; 0.0, 2.0, 0.0]
            * dmatrix![a.cos(), 0.0, -a.sin(); 0.0, 1.0, 0.0; a.sin(), 0.0, a.cos()]
    })
    .unwrap();
    let svd = smooth_svd(&m, 1e-12).unwrap();
    assert_eq!(svd.rank, 2);
    let res = svd.residuals(&m, VERIFY_GRID);
    assert!(
        res.orthogonality_v < 1e-9 && res.reconstruction < 1e-9,
        "{res:?}"
    );
}
