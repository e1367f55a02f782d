//! Reduction of `{N, I}` with `N` in the column SUT class to the constant
//! pair `{N^(Ec), I}`.
//!
//! Step 0 conjugates with a block diagonal of smooth left singular factors
//! so that every secondary block reads `[R; 0]` with `R` square and
//! nonsingular. Each following step uses `K = N E^T + (I - E E^T)`, which
//! satisfies `K E = N` for `E = N^(Ec)`, and the triangular lemma gives
//! `N_next = H^{-1} E K` with `H = I + E K'` unipotent. After step `k` the
//! last `kappa_k = m - (l_1 + ... + l_{mu-k-1})` rows agree with `E`, so
//! `mu - 1` steps end at `E`.

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::chebmat::{grid, max_abs, smooth_svd, MatrixFunction, CHECK_TOL, FIT_TOL, VERIFY_GRID};
use crate::equivalence::{compose, lemma_triangular, verify, DaePair, EquivalenceTransform};
use crate::error::{Error, ErrorKind, Result};
use crate::structure::{elementary_col, BlockSignature, SutMatrixFunction, Variant};

/// Tolerances shared by both pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PipelineOptions {
    /// Accuracy of every adaptive fit.
    pub fit_tol: f64,
    /// Bound for coincidence residuals and the final verification.
    pub check_tol: f64,
    pub grid: usize,
    /// Stop as soon as the iterate equals the target. Off by default so that
    /// traces always hold `mu` records.
    pub early_exit: bool,
    /// Once the coincidence check has passed, overwrite the coinciding rows
    /// (columns) with their exact values before the next step. Without this
    /// their rounding noise is differentiated, and so amplified, by every
    /// later step. Residuals are always measured before the overwrite.
    pub reimpose_fixed: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            fit_tol: FIT_TOL,
            check_tol: CHECK_TOL,
            grid: VERIFY_GRID,
            early_exit: false,
            reimpose_fixed: true,
        }
    }
}

impl PipelineOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            check_tol: tol,
            ..Self::default()
        }
    }
}

/// One record of a pipeline trace. Record `k` holds the iterate `N^(k)`;
/// `k_factor` and `h` are the matrices used to produce `N^(k+1)` and are
/// absent on the last record.
#[derive(Clone, Debug)]
pub struct PipelineStep {
    pub k: usize,
    pub n: MatrixFunction,
    pub k_factor: Option<MatrixFunction>,
    pub h: Option<MatrixFunction>,
    /// Predicted number of coinciding rows (column pipeline) or columns
    /// (row pipeline).
    pub fixed: usize,
    /// Grid residual of the predicted coinciding part against the target.
    pub coincidence_residual: f64,
    /// Largest count of trailing rows (leading columns) that match the
    /// target within the check tolerance.
    pub observed: usize,
    /// Residual of the construction `K E = N` (or `E K = N`).
    pub k_residual: Option<f64>,
    pub h_triangular: Option<bool>,
}

/// Records of one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineTrace {
    pub sig: BlockSignature,
    pub variant: Variant,
    pub steps: Vec<PipelineStep>,
    /// Step 0 followed by all iterations.
    pub total: EquivalenceTransform,
}

pub type ColPipelineTrace = PipelineTrace;

impl PipelineTrace {
    /// Predicted coincidence counts, one per record.
    pub fn fixed_sequence(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.fixed).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<_> = self
            .steps
            .iter()
            .map(|s| {
                let counter = match self.variant {
                    Variant::Rows => "lambda",
                    _ => "kappa",
                };
                json!({
                    "k": s.k,
                    counter: s.fixed,
                    "residuals": {
                        "coincidence": s.coincidence_residual,
                        "construction": s.k_residual,
                    },
                    "degrees": {
                        "N": s.n.degree(),
                        "K": s.k_factor.as_ref().map(|m| m.degree()),
                        "H": s.h.as_ref().map(|m| m.degree()),
                    },
                })
            })
            .collect();
        serde_json::Value::Array(steps)
    }
}

/// `kappa_k = m - sum_{i=1}^{mu-k-1} l_i` for `k = 0..mu-1`.
pub fn kappa_sequence(sig: &BlockSignature) -> Vec<usize> {
    let mu = sig.mu();
    (0..mu)
        .map(|k| sig.m() - sig.ells()[..mu - k - 1].iter().sum::<usize>())
        .collect()
}

pub(crate) fn pipeline_err(step: usize, e: Error) -> Error {
    match e {
        Error::Pipeline { .. } => e,
        other => Error::Pipeline {
            step,
            detail: other.to_string(),
            kind: other.kind(),
        },
    }
}

/// Step 0: `K = diag(U_1, ..., U_{mu-1}, I)` from smooth SVDs of the
/// secondary blocks, applied through the triangular lemma.
pub fn step0_normalize(
    n: &SutMatrixFunction,
    tol: f64,
) -> Result<(SutMatrixFunction, EquivalenceTransform)> {
    step0_normalize_with(n, &PipelineOptions::with_tol(tol))
}

pub fn step0_normalize_with(
    n: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<(SutMatrixFunction, EquivalenceTransform)> {
    let sig = n.sig();
    check_columns(n)?;
    let nf = n.n();
    let interval = nf.interval();
    let off = sig.offsets();
    let ells = sig.ells();
    let mu = sig.mu();
    let mut parts = Vec::with_capacity(mu);
    for i in 0..mu - 1 {
        let blk = nf.block(off[i], off[i + 1], ells[i], ells[i + 1]);
        let svd = smooth_svd(&blk, opts.fit_tol).map_err(|e| pipeline_err(0, e))?;
        parts.push(svd.u);
    }
    parts.push(MatrixFunction::identity(ells[mu - 1], interval));
    let refs: Vec<&MatrixFunction> = parts.iter().collect();
    let bu = MatrixFunction::block_diag(&refs, interval)?;
    let step = lemma_triangular(nf, &bu, opts.fit_tol).map_err(|e| pipeline_err(0, e))?;
    let n0 = SutMatrixFunction::new_unchecked(step.e_hat, sig.clone(), Variant::Columns);
    Ok((n0, step.transform))
}

fn check_columns(n: &SutMatrixFunction) -> Result<()> {
    if n.variant() != Variant::Columns {
        return Err(Error::Predicate(format!(
            "column pipeline needs a columns-variant input, got {}",
            n.variant()
        )));
    }
    n.sig().check_variant(Variant::Columns)
}

/// `K = N E^T + (I - E E^T)` with `E = N^(Ec)`; satisfies `K E = N` for `N`
/// whose secondary blocks have the form `[R; 0]`.
pub fn build_k_col(nk: &MatrixFunction, sig: &BlockSignature) -> Result<MatrixFunction> {
    let e = elementary_col(sig)?;
    if nk.shape() != e.shape() {
        return Err(Error::dim(
            "build_k_col",
            "matrix and signature differ in size",
        ));
    }
    let m = e.nrows();
    let proj = DMatrix::identity(m, m) - &e * e.transpose();
    let k = nk
        .postmul_const(&e.transpose())?
        .add(&MatrixFunction::constant(proj, nk.interval()))?;
    Ok(k)
}

/// Rows `m-count..m` of `n` against `target` on the grid.
fn trailing_rows_residual(values: &[DMatrix<f64>], target: &DMatrix<f64>, count: usize) -> f64 {
    let m = target.nrows();
    values
        .iter()
        .map(|v| max_abs(&(v.rows(m - count, count) - target.rows(m - count, count))))
        .fold(0.0, f64::max)
}

fn observed_trailing_rows(values: &[DMatrix<f64>], target: &DMatrix<f64>, tol: f64) -> usize {
    let m = target.nrows();
    (0..m)
        .rev()
        .take_while(|&i| {
            values
                .iter()
                .all(|v| (v.row(i) - target.row(i)).amax() <= tol)
        })
        .count()
}

/// Residual `max |lhs(t) - rhs(t)|` over the grid.
pub(crate) fn grid_residual(lhs: &MatrixFunction, rhs: &MatrixFunction, ts: &[f64]) -> f64 {
    ts.iter()
        .map(|&t| max_abs(&(lhs.at(t) - rhs.at(t))))
        .fold(0.0, f64::max)
}

/// The iteration after step 0: exactly `mu - 1` applications of the
/// triangular lemma with `K = build_k_col(N^(k))`.
pub fn iterate_col(n0: &SutMatrixFunction, tol: f64) -> Result<ColPipelineTrace> {
    iterate_col_with(n0, &PipelineOptions::with_tol(tol))
}

pub fn iterate_col_with(
    n0: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<ColPipelineTrace> {
    check_columns(n0)?;
    let sig = n0.sig().clone();
    let target = elementary_col(&sig)?;
    let interval = n0.n().interval();
    let ts = grid(interval, opts.grid);
    let kappas = kappa_sequence(&sig);
    let mu = sig.mu();
    let mut total = EquivalenceTransform::identity(sig.m(), interval);
    let mut steps: Vec<PipelineStep> = Vec::with_capacity(mu);
    let mut nk = n0.n().clone();
    for (k, &kappa) in kappas.iter().enumerate() {
        let values = nk.values_on(&ts);
        let res = trailing_rows_residual(&values, &target, kappa);
        let observed = observed_trailing_rows(&values, &target, opts.check_tol);
        if res > opts.check_tol {
            return Err(Error::Pipeline {
                step: k,
                kind: ErrorKind::Verification,
                detail: format!(
                    "last {kappa} rows deviate from the elementary matrix by {res:e} (tolerance {:e})",
                    opts.check_tol
                ),
            });
        }
        let mut record = PipelineStep {
            k,
            n: nk.clone(),
            k_factor: None,
            h: None,
            fixed: kappa,
            coincidence_residual: res,
            observed,
            k_residual: None,
            h_triangular: None,
        };
        let done = k + 1 == mu || (opts.early_exit && observed == sig.m());
        if done {
            steps.push(record);
            break;
        }
        if opts.reimpose_fixed {
            let m = sig.m();
            let rows = target.rows(m - kappa, kappa).into_owned();
            nk = nk.with_block(m - kappa, 0, &MatrixFunction::constant(rows, interval))?;
        }
        let kf = build_k_col(&nk, &sig).map_err(|e| pipeline_err(k, e))?;
        let ke = kf.postmul_const(&target)?;
        record.k_residual = Some(grid_residual(&ke, &nk, &ts));
        let step = lemma_triangular(&nk, &kf, opts.fit_tol).map_err(|e| pipeline_err(k, e))?;
        record.h_triangular = Some(step.h_triangular);
        record.k_factor = Some(kf);
        record.h = Some(step.h);
        steps.push(record);
        total = compose(&total, &step.transform).map_err(|e| pipeline_err(k, e))?;
        nk = step.e_hat;
    }
    Ok(PipelineTrace {
        sig,
        variant: Variant::Columns,
        steps,
        total,
    })
}

/// Full column pipeline: returns the transform `T` with
/// `apply(T, {N, I}) = {N^(Ec), I}` and the constant target.
pub fn canonicalize_col(
    n: &SutMatrixFunction,
    tol: f64,
) -> Result<(EquivalenceTransform, DMatrix<f64>)> {
    let (t, nc, _) = canonicalize_col_traced(n, &PipelineOptions::with_tol(tol))?;
    Ok((t, nc))
}

pub fn canonicalize_col_traced(
    n: &SutMatrixFunction,
    opts: &PipelineOptions,
) -> Result<(EquivalenceTransform, DMatrix<f64>, ColPipelineTrace)> {
    let (n0, t0) = step0_normalize_with(n, opts)?;
    let mut trace = iterate_col_with(&n0, opts)?;
    let total = compose(&t0, &trace.total).map_err(|e| pipeline_err(n.sig().mu(), e))?;
    let nc = elementary_col(n.sig())?;
    finish(n, &nc, &total, opts)?;
    trace.total = total.clone();
    Ok((total, nc, trace))
}

/// Verifies `apply(total, {N, I}) = {target, I}`.
pub(crate) fn finish(
    n: &SutMatrixFunction,
    target: &DMatrix<f64>,
    total: &EquivalenceTransform,
    opts: &PipelineOptions,
) -> Result<()> {
    let interval = n.n().interval();
    let m = target.nrows();
    let id = MatrixFunction::identity(m, interval);
    let p = DaePair::new(n.n().clone(), id.clone())?;
    let q = DaePair::new(MatrixFunction::constant(target.clone(), interval), id)?;
    let report = verify(total, &p, &q, opts.grid, opts.check_tol)?;
    if !report.pass {
        return Err(Error::Residual {
            op: "pipeline verification",
            residual: report.residual_e.max(report.residual_f),
            tol: opts.check_tol,
        });
    }
    Ok(())
}
