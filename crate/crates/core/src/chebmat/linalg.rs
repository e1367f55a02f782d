//! Dense SVD by one-sided Jacobi rotations.
//!
//! nalgebra's bidiagonal SVD occasionally returns factors that do not
//! reconstruct the input (observed on well-conditioned 3x3 matrices), so
//! every SVD in the crate goes through this routine. The matrices here are
//! small; Jacobi is accurate to high relative precision on them.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 80;

/// `A = U diag(sigma) V^T` with square orthogonal `U`, `V` and `sigma`
/// sorted in decreasing order (`min(rows, cols)` entries).
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (r, c) = a.shape();
    if r < c {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let mut w = a.as_slice().to_vec();
    let mut v = DMatrix::<f64>::identity(c, c).as_slice().to_vec();
    let norms = jacobi(&mut w, r, c, Some(&mut v));
    let w = DMatrix::from_vec(r, c, w);
    let v = DMatrix::from_vec(c, c, v);
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let scale = sigma.first().copied().unwrap_or(0.0);
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(r);
    for &j in &order {
        // columns of negligible norm carry no reliable direction
        if norms[j] > 0.0 && norms[j] > scale * 1e-13 {
            cols.push(w.column(j) / norms[j]);
        } else {
            break;
        }
    }
    let u = complete_basis(cols, r);
    let v = v.select_columns(order.iter());
    Svd { u, sigma, v }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn rotate_pair(m: &mut [f64], rows: usize, p: usize, q: usize, cs: f64, sn: f64) {
    let (head, tail) = m.split_at_mut(q * rows);
    let x = &mut head[p * rows..(p + 1) * rows];
    let y = &mut tail[..rows];
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = cs * xa - sn * yb;
        *b = sn * xa + cs * yb;
    }
}

/// One-sided Jacobi on the column-major `rows x cols` matrix `w`
/// (`rows >= cols`), optionally accumulating the rotations into `v`.
/// Returns the column norms, i.e. the unsorted singular values.
fn jacobi(w: &mut [f64], rows: usize, cols: usize, mut v: Option<&mut [f64]>) -> Vec<f64> {
    let mut sq: Vec<f64> = (0..cols)
        .map(|j| {
            let col = &w[j * rows..(j + 1) * rows];
            dot(col, col)
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (alpha, beta) = (sq[p], sq[q]);
                let gamma = dot(&w[p * rows..(p + 1) * rows], &w[q * rows..(q + 1) * rows]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(w, rows, p, q, cs, sn);
                if let Some(v) = v.as_deref_mut() {
                    rotate_pair(v, cols, p, q, cs, sn);
                }
                sq[p] = alpha - t * gamma;
                sq[q] = beta + t * gamma;
            }
        }
        // refresh the running norms against drift
        for (j, s) in sq.iter_mut().enumerate() {
            let col = &w[j * rows..(j + 1) * rows];
            *s = dot(col, col);
        }
        if !rotated {
            break;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Singular values in decreasing order, without the factors.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = a.shape();
    let mut w = if r < c {
        a.transpose().as_slice().to_vec()
    } else {
        a.as_slice().to_vec()
    };
    let mut s = jacobi(&mut w, r.max(c), r.min(c), None);
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Smallest singular value; `+inf` for an empty matrix.
pub fn min_singular(a: &DMatrix<f64>) -> f64 {
    singular_values(a).last().copied().unwrap_or(f64::INFINITY)
}

/// Largest singular value; zero for an empty matrix.
pub fn max_singular(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Extends orthonormal columns to an orthonormal basis of R^n.
pub fn complete_basis(mut cols: Vec<DVector<f64>>, n: usize) -> DMatrix<f64> {
    while cols.len() < n {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            for _ in 0..2 {
                for b in &cols {
                    let p = b.dot(&e);
                    e.axpy(-p, b, 1.0);
                }
            }
            let nrm = e.norm();
            if nrm > best_norm + 1e-12 {
                best_norm = nrm;
                best = Some(e);
            }
        }
        let e = best.expect("n > 0");
        cols.push(e / best_norm);
    }
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebmat::max_abs;

    fn check(a: &DMatrix<f64>) {
        let s = svd(a);
        let (r, c) = a.shape();
        let mut d = DMatrix::zeros(r, c);
        for (i, x) in s.sigma.iter().enumerate() {
            d[(i, i)] = *x;
        }
        assert!(max_abs(&(&s.u * d * s.v.transpose() - a)) < 1e-13 * a.amax().max(1.0));
        assert!(max_abs(&(s.u.transpose() * &s.u - DMatrix::<f64>::identity(r, r))) < 1e-14);
        assert!(max_abs(&(s.v.transpose() * &s.v - DMatrix::<f64>::identity(c, c))) < 1e-14);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let values = singular_values(a);
        for (x, y) in values.iter().zip(&s.sigma) {
            assert!((x - y).abs() < 1e-13 * a.amax().max(1.0));
        }
    }

    #[test]
    fn matrix_that_breaks_bidiagonal_svd() {
        let a = DMatrix::from_column_slice(
            3,
            3,
            &[
                -3.1466664987560815,
                0.34397563693943134,
                -0.801272804883829,
                -0.18454479233055432,
                -1.0549322176064984,
                0.2718548947869345,
                0.776999679130103,
                -1.0369690752766454,
                -3.4965007434938737,
            ],
        );
        check(&a);
    }

    #[test]
    fn rectangular_and_rank_deficient() {
        check(&DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0],
        ));
        check(&DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 3.0, 1.0],
        ));
        check(&DMatrix::zeros(3, 2));
        assert_eq!(min_singular(&DMatrix::zeros(0, 0)), f64::INFINITY);
        let s = svd(&DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]));
        assert_eq!(s.sigma, vec![2.0, 0.0]);
    }
}
