use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cheb;
use super::{Interval, DEGREE_CAP, FIT_TOL};
use crate::error::{Error, Result};

/// Coefficients below `CHOP_REL * fit_tol * scale` are dropped from fitted
/// results. Kept two orders under the fit tolerance so derivatives of
/// composed functions do not see the truncation.
const CHOP_REL: f64 = 1e-2;

/// Smooth matrix-valued function on a compact interval, stored as one
/// Chebyshev series per entry with a shared degree.
///
/// Values are immutable; every operation returns a new function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixFunctionJson", try_from = "MatrixFunctionJson")]
pub struct MatrixFunction {
    rows: usize,
    cols: usize,
    interval: Interval,
    coeffs: Vec<DMatrix<f64>>,
    fit_tol: f64,
}

impl MatrixFunction {
    pub fn from_coeffs(
        interval: Interval,
        coeffs: Vec<DMatrix<f64>>,
        fit_tol: f64,
    ) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::dim("from_coeffs", "empty coefficient list"));
        };
        let (rows, cols) = first.shape();
        if coeffs.iter().any(|c| c.shape() != (rows, cols)) {
            return Err(Error::dim("from_coeffs", "coefficient shapes differ"));
        }
        Ok(Self {
            rows,
            cols,
            interval,
            coeffs,
            fit_tol,
        })
    }

    pub fn constant(value: DMatrix<f64>, interval: Interval) -> Self {
        Self {
            rows: value.nrows(),
            cols: value.ncols(),
            interval,
            coeffs: vec![value],
            fit_tol: FIT_TOL,
        }
    }

    pub fn zeros(rows: usize, cols: usize, interval: Interval) -> Self {
        Self::constant(DMatrix::zeros(rows, cols), interval)
    }

    pub fn identity(n: usize, interval: Interval) -> Self {
        Self::constant(DMatrix::identity(n, n), interval)
    }

    /// `t * I` style helper: the identity-scaled linear function `t`.
    pub fn linear(slope: DMatrix<f64>, offset: DMatrix<f64>, interval: Interval) -> Self {
        // t = mid + half * x
        let c0 = &offset + &slope * interval.mid();
        let c1 = slope * interval.half_width();
        Self {
            rows: c0.nrows(),
            cols: c0.ncols(),
            interval,
            coeffs: vec![c0, c1],
            fit_tol: FIT_TOL,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn fit_tol(&self) -> f64 {
        self.fit_tol
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        let x = self.interval.to_unit(t)?;
        Ok(cheb::clenshaw(&self.coeffs, x))
    }

    /// Evaluation without the domain check; `t` is clamped onto the interval.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        cheb::clenshaw(&self.coeffs, self.interval.to_unit_clamped(t))
    }

    pub fn values_on(&self, ts: &[f64]) -> Vec<DMatrix<f64>> {
        ts.iter().map(|&t| self.at(t)).collect()
    }

    /// Exact derivative of the interpolant.
    pub fn derivative(&self) -> Self {
        let mut d = cheb::derivative_coeffs(&self.coeffs);
        let s = 1.0 / self.interval.half_width();
        for c in &mut d {
            *c *= s;
        }
        Self {
            coeffs: d,
            ..self.clone_shape()
        }
    }

    fn clone_shape(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            interval: self.interval,
            coeffs: Vec::new(),
            fit_tol: self.fit_tol,
        }
    }

    fn check_same(&self, other: &Self, op: &'static str, same_shape: bool) -> Result<()> {
        if self.interval != other.interval {
            return Err(Error::IntervalMismatch { op });
        }
        if same_shape && self.shape() != other.shape() {
            return Err(Error::dim(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, op: &'static str, sign: f64) -> Result<Self> {
        self.check_same(other, op, true)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                let mut c = self
                    .coeffs
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols));
                if let Some(o) = other.coeffs.get(k) {
                    c += o * sign;
                }
                c
            })
            .collect();
        Ok(Self {
            coeffs: cheb::chop(coeffs, 0.0),
            fit_tol: self.fit_tol.max(other.fit_tol),
            ..self.clone_shape()
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, "add", 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, "sub", -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            ..self.clone_shape()
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            interval: self.interval,
            coeffs: self.coeffs.iter().map(|c| c.transpose()).collect(),
            fit_tol: self.fit_tol,
        }
    }

    /// Left-multiplies every coefficient by a constant matrix.
    pub fn premul_const(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.rows {
            return Err(Error::dim(
                "premul_const",
                format!("{} vs {}", m.ncols(), self.rows),
            ));
        }
        Ok(Self {
            rows: m.nrows(),
            cols: self.cols,
            interval: self.interval,
            coeffs: self.coeffs.iter().map(|c| m * c).collect(),
            fit_tol: self.fit_tol,
        })
    }

    /// Right-multiplies every coefficient by a constant matrix.
    pub fn postmul_const(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.cols {
            return Err(Error::dim(
                "postmul_const",
                format!("{} vs {}", self.cols, m.nrows()),
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: m.ncols(),
            interval: self.interval,
            coeffs: self.coeffs.iter().map(|c| c * m).collect(),
            fit_tol: self.fit_tol,
        })
    }

    /// Pointwise product. The product of two series of degrees p and q is
    /// recovered exactly from p+q+1 samples; beyond the degree cap the
    /// product is fitted adaptively instead.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other, "mul", false)?;
        if self.cols != other.rows {
            return Err(Error::dim(
                "mul",
                format!("{:?} * {:?}", self.shape(), other.shape()),
            ));
        }
        if self.is_constant() {
            return other.premul_const(&self.coeffs[0]);
        }
        if other.is_constant() {
            return self.postmul_const(&other.coeffs[0]);
        }
        let tol = self.fit_tol.max(other.fit_tol);
        let n = self.degree() + other.degree();
        if n > DEGREE_CAP {
            return fit(self.interval, tol, |t| self.at(t) * other.at(t));
        }
        let xs = cheb::points(n);
        let vals: Vec<_> = xs
            .iter()
            .map(|&x| cheb::clenshaw(&self.coeffs, x) * cheb::clenshaw(&other.coeffs, x))
            .collect();
        let scale = vals.iter().map(cheb::coeff_magnitude).fold(1.0, f64::max);
        let coeffs = cheb::chop(cheb::values_to_coeffs(&vals), CHOP_REL * tol * scale);
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            interval: self.interval,
            coeffs,
            fit_tol: tol,
        })
    }

    /// Product of a chain of factors, left to right.
    pub fn mul_chain(factors: &[&MatrixFunction]) -> Result<Self> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::dim("mul_chain", "no factors"))?;
        rest.iter().try_fold((*first).clone(), |acc, f| acc.mul(f))
    }

    /// Sub-block of `nr x nc` entries starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self {
            rows: nr,
            cols: nc,
            interval: self.interval,
            coeffs: cheb::chop(
                self.coeffs
                    .iter()
                    .map(|c| c.view((r0, c0), (nr, nc)).into_owned())
                    .collect(),
                0.0,
            ),
            fit_tol: self.fit_tol,
        }
    }

    /// Copy with the block at `(r0, c0)` replaced by `b`.
    pub fn with_block(&self, r0: usize, c0: usize, b: &MatrixFunction) -> Result<Self> {
        self.check_same(b, "with_block", false)?;
        if r0 + b.rows > self.rows || c0 + b.cols > self.cols {
            return Err(Error::dim("with_block", "block exceeds matrix"));
        }
        let n = self.coeffs.len().max(b.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                let mut c = self
                    .coeffs
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols));
                let mut v = c.view_mut((r0, c0), (b.rows, b.cols));
                match b.coeffs.get(k) {
                    Some(bk) => v.copy_from(bk),
                    None => v.fill(0.0),
                }
                c
            })
            .collect();
        Ok(Self {
            coeffs: cheb::chop(coeffs, 0.0),
            ..self.clone_shape()
        })
    }

    /// Block-diagonal assembly. Zero-sized parts are allowed.
    pub fn block_diag(parts: &[&MatrixFunction], interval: Interval) -> Result<Self> {
        let rows: usize = parts.iter().map(|p| p.rows).sum();
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = MatrixFunction::zeros(rows, cols, interval);
        let (mut r, mut c) = (0, 0);
        for p in parts {
            out = out.with_block(r, c, p)?;
            out.fit_tol = out.fit_tol.max(p.fit_tol);
            r += p.rows;
            c += p.cols;
        }
        Ok(out)
    }

    /// Largest absolute entry over the given nodes.
    pub fn max_abs_on(&self, ts: &[f64]) -> f64 {
        ts.iter()
            .map(|&t| cheb::coeff_magnitude(&self.at(t)))
            .fold(0.0, f64::max)
    }

    /// Sum of absolute coefficients of all entries: an upper bound for the
    /// sup norm on the interval.
    pub fn coeff_bound(&self) -> f64 {
        self.coeffs.iter().map(cheb::coeff_magnitude).sum()
    }

    pub fn with_fit_tol(mut self, tol: f64) -> Self {
        self.fit_tol = tol;
        self
    }
}

/// Adaptive Chebyshev fit of `sampler` on `interval`.
///
/// The number of nodes doubles (nested second-kind points, 9, 17, 33, ...)
/// until every coefficient in the upper half of the series is below
/// `tol * max(1, max|value|)`. The result is then chopped.
pub fn fit<F>(interval: Interval, tol: f64, mut sampler: F) -> Result<MatrixFunction>
where
    F: FnMut(f64) -> DMatrix<f64>,
{
    try_fit(interval, tol, |t| Ok(sampler(t)))
}

pub fn try_fit<F>(interval: Interval, tol: f64, mut sampler: F) -> Result<MatrixFunction>
where
    F: FnMut(f64) -> Result<DMatrix<f64>>,
{
    let mut n = 8;
    let mut vals: Vec<DMatrix<f64>> = Vec::new();
    loop {
        let xs = cheb::points(n);
        let mut next = Vec::with_capacity(n + 1);
        for (j, &x) in xs.iter().enumerate() {
            if !vals.is_empty() && j % 2 == 0 {
                next.push(std::mem::take(&mut vals[j / 2]));
            } else {
                next.push(sampler(interval.from_unit(x))?);
            }
        }
        vals = next;
        let shape = vals[0].shape();
        if vals.iter().any(|v| v.shape() != shape) {
            return Err(Error::dim("fit", "sampler changed shape"));
        }
        if vals.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonConvergence(
                "sampler produced non-finite values".into(),
            ));
        }
        let scale = vals.iter().map(cheb::coeff_magnitude).fold(1.0, f64::max);
        let coeffs = cheb::values_to_coeffs(&vals);
        let tail = coeffs[n / 2 + 1..]
            .iter()
            .map(cheb::coeff_magnitude)
            .fold(0.0, f64::max);
        if tail <= tol * scale {
            let coeffs = cheb::chop(coeffs, CHOP_REL * tol * scale);
            return MatrixFunction::from_coeffs(interval, coeffs, tol);
        }
        if n >= DEGREE_CAP {
            return Err(Error::NonConvergence(format!(
                "Chebyshev tail {tail:e} above {:e} at degree cap {DEGREE_CAP}",
                tol * scale
            )));
        }
        n *= 2;
    }
}

/// Interpolant through samples at `points(n)` mapped onto `interval`,
/// chopped at `chop_tol` (relative to the sample scale).
pub fn interpolate(
    interval: Interval,
    values: &[DMatrix<f64>],
    chop_tol: f64,
) -> Result<MatrixFunction> {
    let scale = values.iter().map(cheb::coeff_magnitude).fold(1.0, f64::max);
    let coeffs = cheb::chop(cheb::values_to_coeffs(values), chop_tol * scale);
    MatrixFunction::from_coeffs(interval, coeffs, chop_tol)
}

#[derive(Serialize, Deserialize)]
struct MatrixFunctionJson {
    rows: usize,
    cols: usize,
    interval: [f64; 2],
    degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fit_tol: Option<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl From<MatrixFunction> for MatrixFunctionJson {
    fn from(m: MatrixFunction) -> Self {
        let mut coeffs = Vec::with_capacity(m.rows * m.cols);
        for i in 0..m.rows {
            for j in 0..m.cols {
                coeffs.push(m.coeffs.iter().map(|c| c[(i, j)]).collect());
            }
        }
        Self {
            rows: m.rows,
            cols: m.cols,
            interval: [m.interval.a(), m.interval.b()],
            degree: m.degree(),
            fit_tol: Some(m.fit_tol),
            coeffs,
        }
    }
}

impl TryFrom<MatrixFunctionJson> for MatrixFunction {
    type Error = Error;

    fn try_from(j: MatrixFunctionJson) -> Result<Self> {
        let interval = Interval::new(j.interval[0], j.interval[1])?;
        if j.coeffs.len() != j.rows * j.cols {
            return Err(Error::Parse {
                location: "coeffs".into(),
                detail: format!(
                    "expected {} entries, found {}",
                    j.rows * j.cols,
                    j.coeffs.len()
                ),
            });
        }
        let mut coeffs = vec![DMatrix::zeros(j.rows, j.cols); j.degree + 1];
        for (e, series) in j.coeffs.iter().enumerate() {
            if series.len() > j.degree + 1 {
                return Err(Error::Parse {
                    location: format!("coeffs[{e}]"),
                    detail: format!("{} coefficients exceed degree {}", series.len(), j.degree),
                });
            }
            for (k, v) in series.iter().enumerate() {
                coeffs[k][(e / j.cols, e % j.cols)] = *v;
            }
        }
        Ok(Self {
            rows: j.rows,
            cols: j.cols,
            interval,
            coeffs,
            fit_tol: j.fit_tol.unwrap_or(FIT_TOL),
        })
    }
}
