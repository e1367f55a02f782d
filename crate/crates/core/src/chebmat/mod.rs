//! Matrix-function calculus on a compact interval.
//!
//! Every [`MatrixFunction`] is a Chebyshev series per entry. Composite
//! results that are not polynomial (inverses, SVD factors, solves) are
//! built by sampling at Chebyshev points and refitting adaptively.

pub(crate) mod cheb;
pub mod linalg;
mod matfun;
mod svd;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use matfun::{fit, interpolate, try_fit, MatrixFunction};
pub use svd::{smooth_svd, SvdOptions, SvdTriple};

/// Fitting tolerance used when nothing else is requested.
pub const FIT_TOL: f64 = 1e-12;
/// Tolerance for a posteriori checks on the verification grid.
pub const CHECK_TOL: f64 = 1e-9;
/// Smallest singular value accepted as "pointwise nonsingular".
pub const SINGULARITY_THRESHOLD: f64 = 1e-8;
/// Required gap between retained and discarded singular values.
pub const RANK_GAP_TOL: f64 = 1e-6;
/// Largest number of Chebyshev intervals used by an adaptive fit.
pub const DEGREE_CAP: usize = 512;
/// Default size of the verification grid.
pub const VERIFY_GRID: usize = 65;

/// Compact time interval `[a, b]` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    /// The reference interval [-1, 1].
    pub fn unit() -> Self {
        Self { a: -1.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (self.b - self.a);
        t >= self.a - slack && t <= self.b + slack
    }

    pub(crate) fn to_unit(&self, t: f64) -> Result<f64> {
        if !self.contains(t) {
            return Err(Error::Domain {
                t,
                a: self.a,
                b: self.b,
            });
        }
        Ok(self.to_unit_clamped(t))
    }

    pub(crate) fn to_unit_clamped(&self, t: f64) -> f64 {
        ((t - self.mid()) / self.half_width()).clamp(-1.0, 1.0)
    }

    pub(crate) fn from_unit(&self, x: f64) -> f64 {
        self.mid() + self.half_width() * x
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.a, i.b]
    }
}

/// `count` Chebyshev points of the second kind on `interval`, ascending.
/// Odd counts contain the midpoint.
pub fn grid(interval: Interval, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![interval.mid()];
    }
    let mut g: Vec<f64> = cheb::points(count - 1)
        .into_iter()
        .map(|x| interval.from_unit(x))
        .collect();
    g.reverse();
    g
}

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Induced infinity norm (largest absolute row sum).
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest singular value of `m` over a Chebyshev grid, with the node
/// where it occurs.
pub fn min_singular_on_grid(m: &MatrixFunction, grid_size: usize) -> Result<(f64, f64)> {
    if !m.is_square() {
        return Err(Error::dim(
            "min_singular_on_grid",
            "matrix function is not square",
        ));
    }
    let mut worst = (f64::INFINITY, m.interval().a());
    if m.rows() == 0 {
        return Ok(worst);
    }
    for t in grid(m.interval(), grid_size) {
        let s = linalg::min_singular(&m.at(t));
        if s < worst.0 {
            worst = (s, t);
        }
    }
    Ok(worst)
}

/// Pointwise inverse of a square matrix function.
///
/// Nonsingularity is certified by sampling: the smallest singular value on
/// a dense grid must exceed [`SINGULARITY_THRESHOLD`]. The fitted inverse is
/// checked against `M * inv = I` on the verification grid.
pub fn inverse(m: &MatrixFunction, tol: f64) -> Result<MatrixFunction> {
    if !m.is_square() {
        return Err(Error::dim("inverse", "matrix function is not square"));
    }
    if m.rows() == 0 {
        return Ok(m.clone().with_fit_tol(tol));
    }
    if m.is_constant() {
        let c = &m.coeffs()[0];
        let inv = c
            .clone()
            .try_inverse()
            .filter(|_| linalg::min_singular(c) > SINGULARITY_THRESHOLD)
            .ok_or_else(|| Error::NearSingular {
                t: m.interval().mid(),
                sigma: linalg::min_singular(c),
            })?;
        return Ok(MatrixFunction::constant(inv, m.interval()).with_fit_tol(tol));
    }
    let grid_size = (4 * m.degree() + 1).max(2 * VERIFY_GRID + 1);
    let (sigma, t) = min_singular_on_grid(m, grid_size)?;
    if sigma <= SINGULARITY_THRESHOLD {
        return Err(Error::NearSingular { t, sigma });
    }
    // det is continuous, so a sign change between nodes means a singular
    // point the sampled singular values stepped over
    let nodes = grid(m.interval(), grid_size);
    let dets: Vec<f64> = nodes.iter().map(|&t| m.at(t).determinant()).collect();
    if let Some(i) = dets.windows(2).position(|w| w[0].signum() != w[1].signum()) {
        let t = 0.5 * (nodes[i] + nodes[i + 1]);
        return Err(Error::NearSingular {
            t,
            sigma: linalg::min_singular(&m.at(t)),
        });
    }
    let inv = try_fit(m.interval(), tol, |t| {
        m.at(t)
            .try_inverse()
            .ok_or(Error::NearSingular { t, sigma: 0.0 })
    })?;
    let res = identity_residual(m, &inv, VERIFY_GRID);
    let limit = CHECK_TOL.max(tol);
    if res > limit {
        return Err(Error::Residual {
            op: "inverse",
            residual: res,
            tol: limit,
        });
    }
    Ok(inv)
}

/// `max_t |A(t) B(t) - I|` over the grid.
pub(crate) fn identity_residual(a: &MatrixFunction, b: &MatrixFunction, grid_size: usize) -> f64 {
    let n = a.rows();
    grid(a.interval(), grid_size)
        .into_iter()
        .map(|t| max_abs(&(a.at(t) * b.at(t) - DMatrix::<f64>::identity(n, n))))
        .fold(0.0, f64::max)
}

/// Solves `M(t) X(t) = B(t)` pointwise and fits the result.
pub fn solve(m: &MatrixFunction, b: &MatrixFunction, tol: f64) -> Result<MatrixFunction> {
    if !m.is_square() || m.rows() != b.rows() {
        return Err(Error::dim(
            "solve",
            format!("{:?} \\ {:?}", m.shape(), b.shape()),
        ));
    }
    try_fit(m.interval(), tol, |t| {
        m.at(t)
            .lu()
            .solve(&b.at(t))
            .ok_or(Error::NearSingular { t, sigma: 0.0 })
    })
}

#[cfg(test)]
mod tests;
