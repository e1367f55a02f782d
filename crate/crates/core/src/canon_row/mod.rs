//! Reduction of `{N, I}` with `N` in the row SUT class to `{N^(Er), I}`.
//!
//! Step 0 uses `K = diag(I, V_1, ..., V_{mu-1}) P` with right singular
//! factors of the secondary blocks and the block-wise reversal `P`, which
//! turns `[R 0]` into `[0 R]`. The iteration uses
//! `K_r = E^T N + (I - E^T E)` with `E K_r = N` for `E = N^(Er)` and applies
//! the triangular lemma with `K = K_r^{-1}`, giving
//! `N_next = K_r (I - E K_r')^{-1} E`. After step `k` the leading
//! `lambda_k = l_1 + ... + l_{k+1}` columns agree with `E`.

use nalgebra::DMatrix;

use crate::canon_col::{
    finish, grid_residual, pipeline_err, PipelineOptions, PipelineStep, PipelineTrace,
};
use crate::chebmat::{self, grid, max_abs, smooth_svd, MatrixFunction};
use crate::equivalence::{compose, lemma_triangular, EquivalenceTransform};
use crate::error::{Error, ErrorKind, Result};
use crate::structure::{elementary_row, BlockSignature, SutMatrixFunction, Variant};

pub type RowPipelineTrace = PipelineTrace;

/// `lambda_k = sum_{i=1}^{k+1} l_i` for `k = 0..mu-1`.
pub fn lambda_sequence(sig: &BlockSignature) -> Vec<usize> {
    (0..sig.mu())
        .map(|k| sig.ells()[..=k].iter().sum())
        .collect()
}

fn check_rows(n: &SutMatrixFunction) -> Result<()> {
    if n.variant() != Variant::Rows {
        return Err(Error::Predicate(format!(
            "row pipeline needs a rows-variant input, got {}",
            n.variant()
        )));
    }
    n.sig().check_variant(Variant::Rows)
}

/// Reverses the order inside every block.
pub fn block_flip(sig: &BlockSignature) -> DMatrix<f64> {
    let m = sig.m();
    let mut p = DMatrix::zeros(m, m);
    for (&o, &l) in sig.offsets().iter().zip(sig.ells()) {
        for j in 0..l {
            p[(o + j, o + l - 1 - j)] = 1.0;
        }
    }
    p
}

pub fn step0_normalize_row(
    n: &SutMatrixFunction,
    tol: f64,
) -> Result<(SutMatrixFunction, EquivalenceTransform)> {
    step0_normalize_row_with(n, &PipelineOptions::with_tol(tol))
}

pub fn step0_normalize_row_with(
    n: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<(SutMatrixFunction, EquivalenceTransform)> {
    check_rows(n)?;
    let sig = n.sig();
    let nf = n.n();
    let interval = nf.interval();
    let off = sig.offsets();
    let ells = sig.ells();
    let mut parts = vec![MatrixFunction::identity(ells[0], interval)];
    for i in 0..sig.mu() - 1 {
        let blk = nf.block(off[i], off[i + 1], ells[i], ells[i + 1]);
        let svd = smooth_svd(&blk, opts.fit_tol).map_err(|e| pipeline_err(0, e))?;
        parts.push(svd.v);
    }
    let refs: Vec<&MatrixFunction> = parts.iter().collect();
    let k = MatrixFunction::block_diag(&refs, interval)?.postmul_const(&block_flip(sig))?;
    let step = lemma_triangular(nf, &k, opts.fit_tol).map_err(|e| pipeline_err(0, e))?;
    let n0 = SutMatrixFunction::new_unchecked(step.e_hat, sig.clone(), Variant::Rows);
    Ok((n0, step.transform))
}

/// `K_r = E^T N + (I - E^T E)` with `E = N^(Er)`; satisfies `E K_r = N` for
/// `N` whose secondary blocks have the form `[0 R]`.
pub fn build_k_row(nk: &MatrixFunction, sig: &BlockSignature) -> Result<MatrixFunction> {
    let e = elementary_row(sig)?;
    if nk.shape() != e.shape() {
        return Err(Error::dim(
            "build_k_row",
            "matrix and signature differ in size",
        ));
    }
    let m = e.nrows();
    let proj = DMatrix::identity(m, m) - e.transpose() * &e;
    nk.premul_const(&e.transpose())?
        .add(&MatrixFunction::constant(proj, nk.interval()))
}

fn leading_cols_residual(values: &[DMatrix<f64>], target: &DMatrix<f64>, count: usize) -> f64 {
    values
        .iter()
        .map(|v| max_abs(&(v.columns(0, count) - target.columns(0, count))))
        .fold(0.0, f64::max)
}

fn observed_leading_cols(values: &[DMatrix<f64>], target: &DMatrix<f64>, tol: f64) -> usize {
    (0..target.ncols())
        .take_while(|&j| {
            values
                .iter()
                .all(|v| (v.column(j) - target.column(j)).amax() <= tol)
        })
        .count()
}

pub fn iterate_row(n0: &SutMatrixFunction, tol: f64) -> Result<RowPipelineTrace> {
    iterate_row_with(n0, &PipelineOptions::with_tol(tol))
}

pub fn iterate_row_with(
    n0: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<RowPipelineTrace> {
    check_rows(n0)?;
    let sig = n0.sig().clone();
    let target = elementary_row(&sig)?;
    let interval = n0.n().interval();
    let ts = grid(interval, opts.grid);
    let lambdas = lambda_sequence(&sig);
    let mu = sig.mu();
    let mut total = EquivalenceTransform::identity(sig.m(), interval);
    let mut steps: Vec<PipelineStep> = Vec::with_capacity(mu);
    let mut nk = n0.n().clone();
    for (k, &lambda) in lambdas.iter().enumerate() {
        let values = nk.values_on(&ts);
        let res = leading_cols_residual(&values, &target, lambda);
        let observed = observed_leading_cols(&values, &target, opts.check_tol);
        if res > opts.check_tol {
            return Err(Error::Pipeline {
                step: k,
                kind: ErrorKind::Verification,
                detail: format!(
                    "first {lambda} columns deviate from the elementary matrix by {res:e} (tolerance {:e})",
                    opts.check_tol
                ),
            });
        }
        let mut record = PipelineStep {
            k,
            n: nk.clone(),
            k_factor: None,
            h: None,
            fixed: lambda,
            coincidence_residual: res,
            observed,
            k_residual: None,
            h_triangular: None,
        };
        if k + 1 == mu || (opts.early_exit && observed == sig.m()) {
            steps.push(record);
            break;
        }
        if opts.reimpose_fixed {
            let cols = target.columns(0, lambda).into_owned();
            nk = nk.with_block(0, 0, &MatrixFunction::constant(cols, interval))?;
        }
        let kr = build_k_row(&nk, &sig).map_err(|e| pipeline_err(k, e))?;
        record.k_residual = Some(grid_residual(&kr.premul_const(&target)?, &nk, &ts));
        let kinv = chebmat::inverse(&kr, opts.fit_tol).map_err(|e| pipeline_err(k, e))?;
        let step = lemma_triangular(&nk, &kinv, opts.fit_tol).map_err(|e| pipeline_err(k, e))?;
        record.h_triangular = Some(step.h_triangular);
        record.k_factor = Some(kr);
        record.h = Some(step.h);
        steps.push(record);
        total = compose(&total, &step.transform).map_err(|e| pipeline_err(k, e))?;
        nk = step.e_hat;
    }
    Ok(PipelineTrace {
        sig,
        variant: Variant::Rows,
        steps,
        total,
    })
}

pub fn canonicalize_row(
    n: &SutMatrixFunction,
    tol: f64,
) -> Result<(EquivalenceTransform, DMatrix<f64>)> {
    let (t, nr, _) = canonicalize_row_traced(n, &PipelineOptions::with_tol(tol))?;
    Ok((t, nr))
}

pub fn canonicalize_row_traced(
    n: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<(EquivalenceTransform, DMatrix<f64>, RowPipelineTrace)> {
    let (n0, t0) = step0_normalize_row_with(n, opts)?;
    let mut trace = iterate_row_with(&n0, opts)?;
    let total = compose(&t0, &trace.total).map_err(|e| pipeline_err(n.sig().mu(), e))?;
    let nr = elementary_row(n.sig())?;
    finish(n, &nr, &total, opts)?;
    trace.total = total.clone();
    Ok((total, nr, trace))
}

#[cfg(test)]
mod tests;
