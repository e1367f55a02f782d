//! Pairs in standard canonical form `{diag(I_d, N), diag(Omega, I)}`:
//! assembly, reduction of the nilpotent part to a constant matrix, Jordan
//! form and solution of `E x' + F x = q`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::canon_col::{canonicalize_col_traced, PipelineOptions, PipelineTrace};
use crate::canon_row::canonicalize_row_traced;
use crate::chebmat::{
    self, cheb, grid, interpolate, Interval, MatrixFunction, DEGREE_CAP, FIT_TOL, VERIFY_GRID,
};
use crate::equivalence::{verify, DaePair, EquivalenceTransform};
use crate::error::{Error, Result};
use crate::structure::{
    characteristics_from_nilpotent, elementary, jordan_permutation, permutation_matrix,
    rank_profile, BlockSignature, Characteristics, SutMatrixFunction, Variant,
};

/// A pair in standard canonical form, stored by its blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScfPair {
    d: usize,
    omega: MatrixFunction,
    n: MatrixFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sig: Option<BlockSignature>,
    #[serde(default = "plain")]
    variant: Variant,
}

fn plain() -> Variant {
    Variant::Plain
}

impl ScfPair {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.d + self.n.rows()
    }

    pub fn omega(&self) -> &MatrixFunction {
        &self.omega
    }

    pub fn n(&self) -> &MatrixFunction {
        &self.n
    }

    pub fn sig(&self) -> Option<&BlockSignature> {
        self.sig.as_ref()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn interval(&self) -> Interval {
        self.n.interval()
    }

    /// Strong form: the nilpotent block does not depend on `t`.
    pub fn is_sscf(&self) -> bool {
        self.n.is_constant()
    }

    /// Records the block signature of `N` and the SUT class it belongs to.
    pub fn with_structure(mut self, sig: BlockSignature, variant: Variant) -> Result<Self> {
        if sig.m() != self.n.rows() {
            return Err(Error::dim(
                "with_structure",
                format!("signature {sig} does not fit N of size {}", self.n.rows()),
            ));
        }
        sig.check_variant(variant)?;
        self.sig = Some(sig);
        self.variant = variant;
        Ok(self)
    }

    /// Characteristics of a strong form.
    pub fn characteristics(&self) -> Result<Characteristics> {
        if !self.is_sscf() {
            return Err(Error::Predicate("characteristics need a constant N".into()));
        }
        let n = &self.n.coeffs()[0];
        let r = self.d + rank_profile(n)?[0];
        characteristics_from_nilpotent(n, r, self.d)
    }
}

/// `{diag(I_d, N), diag(Omega, I)}` from its blocks; `d` is the size of
/// `Omega` and may be zero.
pub fn assemble(omega: MatrixFunction, n: MatrixFunction) -> Result<ScfPair> {
    if !omega.is_square() || !n.is_square() {
        return Err(Error::dim("assemble", "Omega and N must be square"));
    }
    if omega.interval() != n.interval() {
        return Err(Error::IntervalMismatch { op: "assemble" });
    }
    Ok(ScfPair {
        d: omega.rows(),
        omega,
        n,
        sig: None,
        variant: Variant::Plain,
    })
}

pub fn to_dae_pair(p: &ScfPair) -> Result<DaePair> {
    let interval = p.interval();
    let e =
        MatrixFunction::block_diag(&[&MatrixFunction::identity(p.d, interval), &p.n], interval)?;
    let f = MatrixFunction::block_diag(
        &[&p.omega, &MatrixFunction::identity(p.n.rows(), interval)],
        interval,
    )?;
    DaePair::new(e, f)
}

/// Reduces the nilpotent block with the pipeline of `variant` and lifts the
/// transform to `diag(I_d, .)`. `Omega` is left as it is.
pub fn canonicalize_pair(
    p: &ScfPair,
    variant: Variant,
    tol: f64,
) -> Result<(EquivalenceTransform, ScfPair)> {
    let (t, s, _) = canonicalize_pair_traced(p, variant, &PipelineOptions::with_tol(tol))?;
    Ok((t, s))
}

pub fn canonicalize_pair_traced(
    p: &ScfPair,
    variant: Variant,
    opts: &PipelineOptions,
) -> Result<(EquivalenceTransform, ScfPair, PipelineTrace)> {
    let sig = p
        .sig
        .clone()
        .ok_or_else(|| Error::Signature("pair carries no block signature".into()))?;
    let sut = SutMatrixFunction::new(
        p.n.clone(),
        sig.clone(),
        variant,
        chebmat::SINGULARITY_THRESHOLD,
    )?;
    let (t, target, trace) = match variant {
        Variant::Columns => canonicalize_col_traced(&sut, opts)?,
        Variant::Rows => canonicalize_row_traced(&sut, opts)?,
        Variant::Plain => {
            return Err(Error::Signature(
                "canonicalization needs the columns or rows variant".into(),
            ))
        }
    };
    let lifted = t.lift(p.d)?;
    let sscf = ScfPair {
        d: p.d,
        omega: p.omega.clone(),
        n: MatrixFunction::constant(target, p.interval()),
        sig: Some(sig),
        variant,
    };
    let report = verify(
        &lifted,
        &to_dae_pair(p)?,
        &to_dae_pair(&sscf)?,
        opts.grid,
        opts.check_tol,
    )?;
    if !report.pass {
        return Err(Error::Residual {
            op: "canonicalize_pair",
            residual: report.residual_e.max(report.residual_f),
            tol: opts.check_tol,
        });
    }
    Ok((lifted, sscf, trace))
}

/// Conjugates the constant elementary block to Jordan form. The transform
/// is `L = diag(I_d, P)`, `K = diag(I_d, P^T)`.
pub fn to_jordan(sscf: &ScfPair) -> Result<(ScfPair, EquivalenceTransform)> {
    if !sscf.is_sscf() {
        return Err(Error::Predicate("to_jordan needs a constant N".into()));
    }
    let sig = sscf
        .sig
        .as_ref()
        .ok_or_else(|| Error::Signature("pair carries no block signature".into()))?;
    let n = &sscf.n.coeffs()[0];
    let e = elementary(sig, sscf.variant)?;
    if chebmat::max_abs(&(n - &e)) > 0.0 {
        return Err(Error::Predicate(
            "N is not the elementary matrix of its signature".into(),
        ));
    }
    let p = permutation_matrix(&jordan_permutation(sig, sscf.variant)?);
    let j = &p * n * p.transpose();
    let d = sscf.d;
    let m = sscf.m();
    let mut l = DMatrix::identity(m, m);
    l.view_mut((d, d), (n.nrows(), n.nrows())).copy_from(&p);
    let t = EquivalenceTransform::constant(l.clone(), l.transpose(), sscf.interval())?;
    let out = ScfPair {
        d,
        omega: sscf.omega.clone(),
        n: MatrixFunction::constant(j, sscf.interval()),
        sig: None,
        variant: Variant::Plain,
    };
    Ok((out, t))
}

/// Solution of `E x' + F x = q` with its certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: MatrixFunction,
    pub residual_norm: f64,
    /// Number of free initial values, the size of the dynamic part.
    pub free_initial_dimension: usize,
}

/// `max_t |E x' + F x - q|_inf` over the grid.
pub fn residual(
    p: &DaePair,
    x: &MatrixFunction,
    q: &MatrixFunction,
    grid_size: usize,
) -> Result<f64> {
    if x.shape() != (p.m(), 1) || q.shape() != (p.m(), 1) {
        return Err(Error::dim("residual", "x and q must be m x 1"));
    }
    let xd = x.derivative();
    Ok(grid(p.interval(), grid_size)
        .into_iter()
        .map(|t| (p.e().at(t) * xd.at(t) + p.f().at(t) * x.at(t) - q.at(t)).amax())
        .fold(0.0, f64::max))
}

/// Solves a strong form: the dynamic part `x1' + Omega x1 = q1`,
/// `x1(a) = x0_dyn` by adaptive Chebyshev collocation, the nilpotent part
/// as `x2 = sum_k (-N)^k q2^(k)`.
pub fn solve_sscf(
    sscf: &ScfPair,
    q: &MatrixFunction,
    x0_dyn: &[f64],
    tol: f64,
) -> Result<SolveResult> {
    if !sscf.is_sscf() {
        return Err(Error::Predicate("solve_sscf needs a constant N".into()));
    }
    let (d, m) = (sscf.d, sscf.m());
    if q.shape() != (m, 1) || x0_dyn.len() != d {
        return Err(Error::dim(
            "solve_sscf",
            format!(
                "q is {:?}, x0 has {} entries; expected ({m}, 1) and {d}",
                q.shape(),
                x0_dyn.len()
            ),
        ));
    }
    let interval = sscf.interval();
    let n = &sscf.n.coeffs()[0];
    let mn = n.nrows();

    let q2 = q.block(d, 0, mn, 1);
    let mut x2 = MatrixFunction::zeros(mn, 1, interval);
    let mut power = DMatrix::<f64>::identity(mn, mn);
    let mut deriv = q2;
    for k in 0..=mn {
        if chebmat::max_abs(&power) == 0.0 {
            break;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        x2 = x2.add(&deriv.premul_const(&(&power * sign))?)?;
        power = &power * n;
        deriv = deriv.derivative();
    }

    let x1 = if d == 0 {
        MatrixFunction::zeros(0, 1, interval)
    } else {
        collocate(&sscf.omega, &q.block(0, 0, d, 1), x0_dyn, tol)?
    };
    let x = MatrixFunction::zeros(m, 1, interval)
        .with_block(0, 0, &x1)?
        .with_block(d, 0, &x2)?;
    let res = residual(&to_dae_pair(sscf)?, &x, q, VERIFY_GRID)?;
    if res > 100.0 * tol {
        return Err(Error::Residual {
            op: "solve_sscf",
            residual: res,
            tol: 100.0 * tol,
        });
    }
    Ok(SolveResult {
        x,
        residual_norm: res,
        free_initial_dimension: d,
    })
}

/// `x' + Omega x = q`, `x(a) = x0`, collocated at `n + 1` Chebyshev points
/// for `n = 16, 32, ...` until the solution's coefficient tail is small.
fn collocate(
    omega: &MatrixFunction,
    q: &MatrixFunction,
    x0: &[f64],
    tol: f64,
) -> Result<MatrixFunction> {
    let interval = omega.interval();
    let d = omega.rows();
    let target = FIT_TOL.max(1e-3 * tol);
    let mut n = 16;
    loop {
        let xs = cheb::points(n);
        let dm = cheb::differentiation_matrix(n) / interval.half_width();
        let size = (n + 1) * d;
        let mut a = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for i in 0..=n {
            let t = interval.from_unit(xs[i]);
            let om = omega.at(t);
            let qi = q.at(t);
            for r in 0..d {
                let row = i * d + r;
                if i == n {
                    // points run from b down to a: the last node carries x(a)
                    a[(row, row)] = 1.0;
                    rhs[row] = x0[r];
                    continue;
                }
                for j in 0..=n {
                    a[(row, j * d + r)] += dm[(i, j)];
                }
                for c in 0..d {
                    a[(row, i * d + c)] += om[(r, c)];
                }
                rhs[row] = qi[(r, 0)];
            }
        }
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NonConvergence("singular collocation system".into()))?;
        let vals: Vec<DMatrix<f64>> = (0..=n)
            .map(|i| DMatrix::from_iterator(d, 1, sol.rows(i * d, d).iter().copied()))
            .collect();
        let coeffs = cheb::values_to_coeffs(&vals);
        let scale = vals.iter().map(chebmat::max_abs).fold(1.0, f64::max);
        let tail = coeffs[n / 2 + 1..]
            .iter()
            .map(cheb::coeff_magnitude)
            .fold(0.0, f64::max);
        if tail <= target * scale {
            return interpolate(interval, &vals, 1e-2 * target);
        }
        if n >= DEGREE_CAP {
            return Err(Error::NonConvergence(format!(
                "collocation tail {tail:e} above {:e} at {n} points",
                target * scale
            )));
        }
        n *= 2;
    }
}

/// `x = K x~` and `q = L^{-1} q~`: maps a solution of the transformed
/// problem back to the original coordinates.
pub fn pull_back(
    t: &EquivalenceTransform,
    x_tilde: &MatrixFunction,
    q_tilde: &MatrixFunction,
    tol: f64,
) -> Result<(MatrixFunction, MatrixFunction)> {
    let x = t.k().mul(x_tilde)?;
    let q = chebmat::solve(t.l(), q_tilde, tol)?;
    Ok((x, q))
}

/// `q~ = L q`, the right-hand side seen by the transformed problem.
pub fn push_forward_rhs(t: &EquivalenceTransform, q: &MatrixFunction) -> Result<MatrixFunction> {
    t.l().mul(q)
}

/// A problem file: a standard canonical form plus right-hand side and
/// initial values of the dynamic part.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Problem {
    pub interval: Interval,
    pub d: usize,
    pub omega: MatrixFunction,
    pub n_part: MatrixFunction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<BlockSignature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub q: MatrixFunction,
    pub x0_dyn: Vec<f64>,
}

impl Problem {
    pub fn pair(&self) -> Result<ScfPair> {
        if self.omega.rows() != self.d {
            return Err(Error::dim(
                "problem",
                format!("d = {} but Omega is {:?}", self.d, self.omega.shape()),
            ));
        }
        let p = assemble(self.omega.clone(), self.n_part.clone())?;
        match &self.signature {
            Some(sig) => p.with_structure(sig.clone(), self.variant.unwrap_or(Variant::Plain)),
            None => Ok(p),
        }
    }
}

/// Report of [`solve_problem`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub residual: f64,
    pub free_dimension: usize,
    pub canonicalized: bool,
    pub timings_ms: SolveTimings,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveTimings {
    pub canonicalize: f64,
    pub solve: f64,
}

/// Solves a problem file. A time-varying `N` is first reduced to its strong
/// form; the solution is pulled back and checked against the original pair.
pub fn solve_problem(problem: &Problem, tol: f64) -> Result<(SolveResult, SolveReport)> {
    let pair = problem.pair()?;
    let mut timings = SolveTimings::default();
    if pair.is_sscf() {
        let start = Instant::now();
        let res = solve_sscf(&pair, &problem.q, &problem.x0_dyn, tol)?;
        timings.solve = start.elapsed().as_secs_f64() * 1e3;
        let report = SolveReport {
            residual: res.residual_norm,
            free_dimension: res.free_initial_dimension,
            canonicalized: false,
            timings_ms: timings,
        };
        return Ok((res, report));
    }
    let start = Instant::now();
    let (t, sscf) = canonicalize_pair(&pair, pair.variant, tol)?;
    timings.canonicalize = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let qs = push_forward_rhs(&t, &problem.q)?;
    // the dynamic block of K is the identity, so x0 carries over unchanged
    let solved = solve_sscf(&sscf, &qs, &problem.x0_dyn, tol)?;
    let x = t.k().mul(&solved.x)?;
    let res = residual(&to_dae_pair(&pair)?, &x, &problem.q, VERIFY_GRID)?;
    timings.solve = start.elapsed().as_secs_f64() * 1e3;
    if res > 100.0 * tol {
        return Err(Error::Residual {
            op: "solve_problem",
            residual: res,
            tol: 100.0 * tol,
        });
    }
    let out = SolveResult {
        x,
        residual_norm: res,
        free_initial_dimension: pair.d,
    };
    let report = SolveReport {
        residual: res,
        free_dimension: pair.d,
        canonicalized: true,
        timings_ms: timings,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests;
