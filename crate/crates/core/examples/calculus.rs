//! Chebyshev matrix functions: fitting, derivatives, products, inverses and
//! a smooth SVD through a singular-value crossing.

use nalgebra::dmatrix;
use sscf::chebmat::{fit, grid, inverse, smooth_svd, Interval};

fn main() -> sscf::Result<()> {
    let iv = Interval::new(-1.0, 2.0)?;
    let a = fit(
        iv,
        1e-13,
        |t| dmatrix![(3.0 * t).sin(), t.exp(); t * t, 2.0 + t.cos()],
    )?;
    println!("A fitted with degree {}", a.degree());

    let da = a.derivative();
    let t = 0.7;
    println!("A'(0.7) =\n{}", da.at(t));

    let b = fit(
        iv,
        1e-13,
        |t| dmatrix![2.0 + (3.0 * t).sin(), 0.25 * t.exp(); 0.25 * t * t, 2.0 + t.cos()],
    )?;
    let binv = inverse(&b, 1e-12)?;
    println!(
        "B^-1 has degree {}, B(0.7) B^-1(0.7) =\n{}",
        binv.degree(),
        b.at(t) * binv.at(t)
    );

    // A itself is singular somewhere in the interval
    if let Err(e) = inverse(&a, 1e-12) {
        println!("A^-1: {e}");
    }

    // the singular values 2 + t and 3 - t/2 cross at t = 2/3; a smooth SVD
    // follows each branch through the crossing instead of re-sorting
    let m = fit(iv, 1e-13, |t| dmatrix![2.0 + t, 0.0; 0.0, 3.0 - 0.5 * t])?;
    let svd = smooth_svd(&m, 1e-10)?;
    let worst = grid(iv, 65)
        .into_iter()
        .map(|s| (svd.u.at(s) * svd.s.at(s) * svd.v.at(s).transpose() - m.at(s)).amax())
        .fold(0.0, f64::max);
    println!("smooth SVD: rank {}, |U S V^T - M| = {worst:.1e}", svd.rank);
    Ok(())
}
