//! Scalar Chebyshev machinery shared by the matrix-function code: points of
//! the second kind, the values-to-coefficients transform, Clenshaw
//! evaluation and the derivative recurrence. Coefficient "vectors" are
//! slices of matrices so every entry of a matrix function is handled in one
//! pass.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

/// Chebyshev points of the second kind `cos(j*pi/n)`, `j = 0..=n`, on [-1, 1].
/// Ordered from +1 down to -1. `n = 0` yields the single point 0.
pub fn points(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|j| cos_pi_ratio(j, n)).collect()
}

// cos(j*pi/n) with the symmetric values snapped so that the midpoint is 0
// exactly and the point set is symmetric.
fn cos_pi_ratio(j: usize, n: usize) -> f64 {
    let j2 = j % (2 * n);
    if 2 * j2 == n || 2 * j2 == 3 * n {
        return 0.0;
    }
    // sin form is symmetric about the midpoint
    (PI * (n as f64 - 2.0 * j2 as f64) / (2.0 * n as f64)).sin()
}

fn transform_matrix(n: usize) -> Arc<DMatrix<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DMatrix<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(w) = cache.lock().expect("transform cache poisoned").get(&n) {
        return Arc::clone(w);
    }
    let mut w = DMatrix::zeros(n + 1, n + 1);
    let nf = n as f64;
    for k in 0..=n {
        let ck = if k == 0 || k == n { 0.5 } else { 1.0 };
        for j in 0..=n {
            let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
            let c = (PI * ((j * k) % (2 * n)) as f64 / nf).cos();
            w[(k, j)] = 2.0 / nf * ck * wj * c;
        }
    }
    let w = Arc::new(w);
    cache
        .lock()
        .expect("transform cache poisoned")
        .insert(n, Arc::clone(&w));
    w
}

/// Maps samples at `points(n)` to the coefficients of the degree-`n`
/// interpolant. All samples must share one shape.
pub fn values_to_coeffs(values: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = values.len() - 1;
    let (r, c) = values[0].shape();
    if n == 0 {
        return vec![values[0].clone()];
    }
    let rc = r * c;
    let mut flat = DMatrix::zeros(n + 1, rc);
    for (j, v) in values.iter().enumerate() {
        for (e, x) in v.iter().enumerate() {
            flat[(j, e)] = *x;
        }
    }
    let w = transform_matrix(n);
    let coef = w.as_ref() * flat;
    (0..=n)
        .map(|k| DMatrix::from_iterator(r, c, coef.row(k).iter().copied()))
        .collect()
}

/// Clenshaw evaluation of `sum_k c_k T_k(x)`.
pub fn clenshaw(coeffs: &[DMatrix<f64>], x: f64) -> DMatrix<f64> {
    let n = coeffs.len();
    if n == 1 {
        return coeffs[0].clone();
    }
    let (r, c) = coeffs[0].shape();
    let mut b1 = DMatrix::zeros(r, c);
    let mut b2 = DMatrix::zeros(r, c);
    for k in (1..n).rev() {
        // b0 = c_k + 2x b1 - b2, stored into b2
        b2.zip_zip_apply(&b1, &coeffs[k], |b2v: &mut f64, b1v: f64, ck: f64| {
            *b2v = ck + 2.0 * x * b1v - *b2v;
        });
        std::mem::swap(&mut b1, &mut b2);
    }
    let mut out = coeffs[0].clone();
    out.zip_zip_apply(&b1, &b2, |o: &mut f64, b1v: f64, b2v: f64| {
        *o += x * b1v - b2v
    });
    out
}

/// Coefficients of d/dx of the series on [-1, 1].
pub fn derivative_coeffs(coeffs: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = coeffs.len() - 1;
    let (r, c) = coeffs[0].shape();
    if n == 0 {
        return vec![DMatrix::zeros(r, c)];
    }
    let mut d = vec![DMatrix::zeros(r, c); n + 2];
    for k in (1..=n).rev() {
        let next = d[k + 1].clone();
        d[k - 1] = next + &coeffs[k] * (2.0 * k as f64);
    }
    d[0] *= 0.5;
    d.truncate(n);
    d
}

/// Differentiation matrix on `points(n)`: `(D v)_i` is the derivative at
/// `x_i` of the interpolant through `v`.
pub fn differentiation_matrix(n: usize) -> DMatrix<f64> {
    let x = points(n);
    let mut d = DMatrix::zeros(n + 1, n + 1);
    if n == 0 {
        return d;
    }
    let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 };
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (x[i] - x[j]);
            }
        }
        // rows of a differentiation matrix annihilate constants
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d
}

/// Largest absolute entry over coefficient index `k`.
pub fn coeff_magnitude(c: &DMatrix<f64>) -> f64 {
    c.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Drops trailing coefficients whose magnitude is at most `threshold`.
/// Always keeps the constant term.
pub fn chop(mut coeffs: Vec<DMatrix<f64>>, threshold: f64) -> Vec<DMatrix<f64>> {
    while coeffs.len() > 1 && coeff_magnitude(coeffs.last().unwrap()) <= threshold {
        coeffs.pop();
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn points_are_symmetric_and_hit_zero() {
        let p = points(8);
        assert_eq!(p.len(), 9);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[8], -1.0);
        assert_eq!(p[4], 0.0);
        for j in 0..=8 {
            assert_eq!(p[j], -p[8 - j]);
        }
    }

    #[test]
    fn transform_recovers_t3() {
        let n = 8;
        let vals: Vec<_> = points(n)
            .iter()
            .map(|&x| scalar(4.0 * x * x * x - 3.0 * x))
            .collect();
        let c = values_to_coeffs(&vals);
        for (k, ck) in c.iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((ck[(0, 0)] - want).abs() < 1e-14, "k={k} {}", ck[(0, 0)]);
        }
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let c: Vec<_> = [0.5, -1.0, 0.25, 2.0].iter().map(|&v| scalar(v)).collect();
        let x: f64 = 0.3;
        let th = x.acos();
        let direct: f64 = (0..4).map(|k| c[k][(0, 0)] * (k as f64 * th).cos()).sum();
        assert!((clenshaw(&c, x)[(0, 0)] - direct).abs() < 1e-14);
    }

    #[test]
    fn differentiation_matrix_on_cubic() {
        let n = 6;
        let x = points(n);
        let d = differentiation_matrix(n);
        let v = nalgebra::DVector::from_iterator(n + 1, x.iter().map(|&x| x * x * x - x));
        let dv = &d * v;
        for (i, &xi) in x.iter().enumerate() {
            assert!((dv[i] - (3.0 * xi * xi - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_t2_is_4x() {
        let c = vec![scalar(0.0), scalar(0.0), scalar(1.0)];
        let d = derivative_coeffs(&c);
        assert_eq!(d.len(), 2);
        assert!((d[0][(0, 0)]).abs() < 1e-15);
        assert!((d[1][(0, 0)] - 4.0).abs() < 1e-15);
    }
}
