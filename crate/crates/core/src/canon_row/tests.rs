use nalgebra::{dmatrix, DMatrix};

use super::*;
use crate::canon_col::canonicalize_col;
use crate::chebmat::{fit, Interval, FIT_TOL, VERIFY_GRID};
use crate::equivalence::{verify, DaePair};
use crate::structure::{characteristics_from_nilpotent, is_sut_rows, jordan_blocks};

fn unit() -> Interval {
    Interval::unit()
}

fn sut(n: MatrixFunction, ells: &[usize], variant: Variant) -> SutMatrixFunction {
    let sig = BlockSignature::new(ells.to_vec()).unwrap();
    SutMatrixFunction::new(n, sig, variant, 1e-8).unwrap()
}

fn worked(variant: Variant) -> SutMatrixFunction {
    sut(
        fit(unit(), FIT_TOL, |t| dmatrix![0.0, 2.0 + t; 0.0, 0.0]).unwrap(),
        &[1, 1],
        variant,
    )
}

// l = (1, 2, 3): full-row-rank secondary blocks [D 0] Q^T plus fill
fn instance_123() -> SutMatrixFunction {
    let n = fit(unit(), FIT_TOL, |t| {
        let mut n = DMatrix::zeros(6, 6);
        let (a, b) = (0.5 * t - 0.2, 0.7 * t);
        let q = dmatrix![a.cos(), -a.sin(), 0.0; a.sin(), a.cos(), 0.0; 0.0, 0.0, 1.0]
            * dmatrix![1.0, 0.0, 0.0; 0.0, b.cos(), -b.sin(); 0.0, b.sin(), b.cos()];
        n[(0, 1)] = 1.0 + 0.4 * t;
        n[(0, 2)] = 0.3 * t * t;
        let d = dmatrix![2.5 - 0.5 * t, 0.0, 0.0; 0.1 * t, 1.0 + 0.2 * t, 0.0];
        n.view_mut((1, 3), (2, 3)).copy_from(&(d * q.transpose()));
        n[(0, 4)] = 0.2 * t;
        n
    })
    .unwrap();
    sut(n, &[1, 2, 3], Variant::Rows)
}

#[test]
fn lambda_sequences() {
    let sig = BlockSignature::new(vec![2, 4, 5, 7, 8]).unwrap();
    assert_eq!(lambda_sequence(&sig), vec![2, 6, 11, 18, 26]);
}

#[test]
fn build_k_row_examples() {
    let sig = BlockSignature::new(vec![1, 2, 3]).unwrap();
    let e = MatrixFunction::constant(elementary_row(&sig).unwrap(), unit());
    assert_eq!(
        build_k_row(&e, &sig).unwrap().coeffs()[0],
        DMatrix::identity(6, 6)
    );
    let n = worked(Variant::Rows);
    let k = build_k_row(n.n(), n.sig()).unwrap();
    let want = fit(unit(), FIT_TOL, |t| dmatrix![1.0, 0.0; 0.0, 2.0 + t]).unwrap();
    assert!(grid_residual(&k, &want, &grid(unit(), 33)) < 1e-14);
}

#[test]
fn step0_flips_rank_to_the_right() {
    let n = fit(unit(), FIT_TOL, |t| {
        let mut n = DMatrix::zeros(3, 3);
        n[(0, 1)] = 2.0 + t;
        n
    })
    .unwrap();
    let (n0, _) = step0_normalize_row(&sut(n, &[1, 2], Variant::Rows), 1e-9).unwrap();
    for t in grid(unit(), 17) {
        let v = n0.n().at(t);
        assert!(v[(0, 1)].abs() < 1e-12);
        assert!((v[(0, 2)].abs() - (2.0 + t)).abs() < 1e-12);
    }
}

#[test]
fn scalar_case_matches_column_step0() {
    let (r, _) = step0_normalize_row(&worked(Variant::Rows), 1e-9).unwrap();
    let (c, _) = crate::canon_col::step0_normalize(&worked(Variant::Columns), 1e-9).unwrap();
    for t in grid(unit(), 17) {
        assert!((r.n().at(t)[(0, 1)].abs() - c.n().at(t)[(0, 1)].abs()).abs() < 1e-12);
    }
}

#[test]
fn worked_example_one_step() {
    let (t, nr, trace) =
        canonicalize_row_traced(&worked(Variant::Rows), &PipelineOptions::with_tol(1e-10)).unwrap();
    assert_eq!(nr, dmatrix![0.0, 1.0; 0.0, 0.0]);
    assert_eq!(trace.steps.len(), 2);
    let id = MatrixFunction::identity(2, unit());
    let p = DaePair::new(worked(Variant::Rows).n().clone(), id.clone()).unwrap();
    let q = DaePair::new(MatrixFunction::constant(nr, unit()), id).unwrap();
    assert!(verify(&t, &p, &q, VERIFY_GRID, 1e-10).unwrap().pass);
}

#[test]
fn constant_elementary_input_gives_identity() {
    let sig = BlockSignature::new(vec![1, 2, 3]).unwrap();
    let e = elementary_row(&sig).unwrap();
    let (t, nr) = canonicalize_row(
        &sut(
            MatrixFunction::constant(e.clone(), unit()),
            &[1, 2, 3],
            Variant::Rows,
        ),
        1e-12,
    )
    .unwrap();
    assert_eq!(nr, e);
    let id = MatrixFunction::identity(6, unit());
    let ts = grid(unit(), 17);
    assert!(grid_residual(t.k(), &id, &ts) < 1e-13 && grid_residual(t.l(), &id, &ts) < 1e-13);
}

#[test]
fn time_varying_123_instance() {
    let n = instance_123();
    let (_, _, trace) = canonicalize_row_traced(&n, &PipelineOptions::with_tol(1e-8)).unwrap();
    assert_eq!(trace.fixed_sequence(), vec![1, 3, 6]);
    let mut last = 0;
    for s in &trace.steps {
        assert!(s.coincidence_residual <= 1e-9, "{s:?}");
        assert!(s.observed >= s.fixed && s.observed >= last);
        last = s.observed;
        assert!(is_sut_rows(&s.n, n.sig(), 1e-8).unwrap());
        if let Some(r) = s.k_residual {
            assert!(r < 1e-10);
        }
    }
    assert_eq!(trace.to_json()[2]["lambda"], 6);
}

#[test]
fn row_and_column_routes_reach_the_same_jordan_form() {
    // reversal of the transposed matrix turns a row instance into a column
    // instance with the same ranks of powers
    let n = instance_123();
    let (_, nr) = canonicalize_row(&n, 1e-8).unwrap();
    let m = 6;
    let mut j = DMatrix::zeros(m, m);
    for i in 0..m {
        j[(i, m - 1 - i)] = 1.0;
    }
    let dual = n
        .n()
        .transpose()
        .premul_const(&j)
        .unwrap()
        .postmul_const(&j)
        .unwrap();
    let dual = sut(dual, &[3, 2, 1], Variant::Columns);
    let (_, nc) = canonicalize_col(&dual, 1e-8).unwrap();
    let cr = characteristics_from_nilpotent(&nr, nr.rank(1e-9), 0).unwrap();
    let cc = characteristics_from_nilpotent(&nc, nc.rank(1e-9), 0).unwrap();
    assert_eq!(jordan_blocks(&cr).unwrap(), jordan_blocks(&cc).unwrap());
}
