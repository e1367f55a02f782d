use nalgebra::{dmatrix, DMatrix};

use super::*;
use crate::chebmat::{fit, max_abs};
use crate::structure::{elementary_col, jordan_matrix};

fn unit() -> Interval {
    Interval::unit()
}

fn mf(f: impl FnMut(f64) -> DMatrix<f64>) -> MatrixFunction {
    fit(unit(), FIT_TOL, f).unwrap()
}

fn j2() -> MatrixFunction {
    MatrixFunction::constant(dmatrix![0.0, 1.0; 0.0, 0.0], unit())
}

fn close_to(x: &MatrixFunction, f: impl Fn(f64) -> DMatrix<f64>, tol: f64) -> bool {
    grid(unit(), 33)
        .into_iter()
        .all(|t| max_abs(&(x.at(t) - f(t))) <= tol)
}

#[test]
fn purely_algebraic_index_two() {
    let p = assemble(MatrixFunction::zeros(0, 0, unit()), j2()).unwrap();
    assert_eq!((p.d(), p.m()), (0, 2));
    let q = mf(|t| dmatrix![t.sin(); t.cos()]);
    let s = solve_sscf(&p, &q, &[], 1e-10).unwrap();
    assert_eq!(s.free_initial_dimension, 0);
    assert!(close_to(&s.x, |t| dmatrix![2.0 * t.sin(); t.cos()], 1e-12));
    assert!(s.residual_norm < 1e-10);
}

#[test]
fn dynamic_and_nilpotent_parts() {
    // x = (e^t, sin t, cos t) with Omega = t
    let omega = mf(|t| dmatrix![t]);
    let p = assemble(omega, j2()).unwrap();
    let q = mf(|t| dmatrix![(1.0 + t) * t.exp(); 0.0; t.cos()]);
    let a = unit().a();
    let s = solve_sscf(&p, &q, &[a.exp()], 1e-10).unwrap();
    assert_eq!(s.free_initial_dimension, 1);
    assert!(close_to(
        &s.x,
        |t| dmatrix![t.exp(); t.sin(); t.cos()],
        1e-10
    ));
    let r = residual(&to_dae_pair(&p).unwrap(), &s.x, &q, VERIFY_GRID).unwrap();
    assert!(r < 1e-9, "{r:e}");
}

#[test]
fn perturbed_solution_has_visible_residual() {
    let p = assemble(mf(|t| dmatrix![t]), j2()).unwrap();
    let q = mf(|t| dmatrix![(1.0 + t) * t.exp(); 0.0; t.cos()]);
    let s = solve_sscf(&p, &q, &[unit().a().exp()], 1e-10).unwrap();
    let bump = mf(|t| dmatrix![1e-3 * t; 0.0; 0.0]);
    let r = residual(
        &to_dae_pair(&p).unwrap(),
        &s.x.add(&bump).unwrap(),
        &q,
        VERIFY_GRID,
    )
    .unwrap();
    assert!(r > 5e-4 && r < 5e-3, "{r:e}");
}

#[test]
fn zero_forcing_gives_zero_algebraic_part() {
    let sig = BlockSignature::new(vec![3, 2, 1]).unwrap();
    let n = MatrixFunction::constant(elementary_col(&sig).unwrap(), unit());
    let p = assemble(mf(|_| dmatrix![1.0, 0.0; 0.0, 2.0]), n).unwrap();
    let q = MatrixFunction::zeros(8, 1, unit());
    let s = solve_sscf(&p, &q, &[1.0, -1.0], 1e-10).unwrap();
    let a = unit().a();
    assert!(close_to(
        &s.x,
        |t| {
            let mut x = DMatrix::zeros(8, 1);
            x[(0, 0)] = (-(t - a)).exp();
            x[(1, 0)] = -(-2.0 * (t - a)).exp();
            x
        },
        1e-10
    ));
}

#[test]
fn time_varying_n_is_reduced_before_solving() {
    let n = mf(|t| dmatrix![0.0, 2.0 + t; 0.0, 0.0]);
    let sig = BlockSignature::new(vec![1, 1]).unwrap();
    let pair = assemble(mf(|t| dmatrix![0.5 * t]), n)
        .unwrap()
        .with_structure(sig.clone(), Variant::Columns)
        .unwrap();
    assert!(!pair.is_sscf());
    let (t, sscf) = canonicalize_pair(&pair, Variant::Columns, 1e-10).unwrap();
    assert!(sscf.is_sscf());
    assert_eq!(sscf.n().coeffs()[0], dmatrix![0.0, 1.0; 0.0, 0.0]);
    assert_eq!(t.m(), 3);

    let problem = Problem {
        interval: unit(),
        d: 1,
        omega: pair.omega().clone(),
        n_part: pair.n().clone(),
        signature: Some(sig),
        variant: Some(Variant::Columns),
        q: mf(|t| dmatrix![1.0; t.sin(); t * t]),
        x0_dyn: vec![0.5],
    };
    let (s, report) = solve_problem(&problem, 1e-10).unwrap();
    assert!(report.canonicalized);
    assert!(s.residual_norm < 1e-8, "{}", s.residual_norm);
    assert!((s.x.at(unit().a())[(0, 0)] - 0.5).abs() < 1e-10);

    let text = serde_json::to_string(&problem).unwrap();
    let back: Problem = serde_json::from_str(&text).unwrap();
    assert_eq!(back.pair().unwrap(), problem.pair().unwrap());
}

#[test]
fn jordan_form_of_elementary_block() {
    let sig = BlockSignature::new(vec![3, 2, 1]).unwrap();
    let e = elementary_col(&sig).unwrap();
    let p = assemble(mf(|_| dmatrix![1.0]), MatrixFunction::constant(e, unit()))
        .unwrap()
        .with_structure(sig, Variant::Columns)
        .unwrap();
    let c = p.characteristics().unwrap();
    assert_eq!((c.m(), c.r(), c.d()), (7, 4, 1));
    let (j, t) = to_jordan(&p).unwrap();
    assert_eq!(j.n().coeffs()[0], jordan_matrix(&[3, 2, 1]));
    let r = verify(
        &t,
        &to_dae_pair(&p).unwrap(),
        &to_dae_pair(&j).unwrap(),
        VERIFY_GRID,
        0.0,
    )
    .unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn rejects_bad_shapes() {
    let p = assemble(MatrixFunction::zeros(0, 0, unit()), j2()).unwrap();
    let q = MatrixFunction::zeros(3, 1, unit());
    assert!(solve_sscf(&p, &q, &[], 1e-10).is_err());
    assert!(solve_sscf(&p, &MatrixFunction::zeros(2, 1, unit()), &[1.0], 1e-10).is_err());
    assert!(assemble(MatrixFunction::zeros(1, 2, unit()), j2()).is_err());
}

#[test]
fn assemble_examples() {
    let p = assemble(MatrixFunction::zeros(0, 0, unit()), j2()).unwrap();
    let dp = to_dae_pair(&p).unwrap();
    assert_eq!(dp.e().at(0.3), dmatrix![0.0, 1.0; 0.0, 0.0]);
    assert_eq!(dp.f().at(0.3), DMatrix::identity(2, 2));

    let p = assemble(mf(|t| dmatrix![t]), MatrixFunction::zeros(1, 1, unit())).unwrap();
    let dp = to_dae_pair(&p).unwrap();
    for t in grid(unit(), 9) {
        assert_eq!(dp.e().at(t), dmatrix![1.0, 0.0; 0.0, 0.0]);
        assert!(max_abs(&(dp.f().at(t) - dmatrix![t, 0.0; 0.0, 1.0])) < 1e-15);
    }
}

#[test]
fn canonicalizing_a_strong_form_is_the_identity() {
    let sig = BlockSignature::new(vec![2, 1]).unwrap();
    let n = MatrixFunction::constant(elementary_col(&sig).unwrap(), unit());
    let p = assemble(mf(|t| dmatrix![t]), n)
        .unwrap()
        .with_structure(sig, Variant::Columns)
        .unwrap();
    let (t, s) = canonicalize_pair(&p, Variant::Columns, 1e-10).unwrap();
    assert_eq!(s, p);
    let id = MatrixFunction::identity(4, unit());
    assert!(close_to(t.k(), |_| id.at(0.0), 1e-14) && close_to(t.l(), |_| id.at(0.0), 1e-14));
}

#[test]
fn jordan_of_small_elementary_blocks() {
    let one = |ells: Vec<usize>| {
        let sig = BlockSignature::new(ells).unwrap();
        let e = elementary_col(&sig).unwrap();
        assemble(
            MatrixFunction::zeros(0, 0, unit()),
            MatrixFunction::constant(e, unit()),
        )
        .unwrap()
        .with_structure(sig, Variant::Columns)
        .unwrap()
    };
    let p = one(vec![1, 1]);
    let (j, _) = to_jordan(&p).unwrap();
    assert_eq!(j.n().coeffs()[0], p.n().coeffs()[0]);

    let p = one(vec![2, 1]);
    let (j, _) = to_jordan(&p).unwrap();
    assert_eq!(j.n().coeffs()[0], jordan_matrix(&[2, 1]));
    assert_eq!(
        rank_profile(&j.n().coeffs()[0]).unwrap(),
        rank_profile(&p.n().coeffs()[0]).unwrap()
    );
}
