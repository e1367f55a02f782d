//! Solve a scrambled DAE with a known solution: reduce it, solve the strong
//! form, map back and compare.

use sscf::chebmat::grid;
use sscf::dae::{canonicalize_pair, pull_back, push_forward_rhs, residual, solve_sscf};
use sscf::equivalence::compose;
use sscf::genbench::{manufactured, GenSpec};
use sscf::structure::{BlockSignature, Variant};

fn main() -> sscf::Result<()> {
    let d = 2;
    let spec = GenSpec::new(BlockSignature::new(vec![2, 1, 1])?, Variant::Columns, 1, 3)?;
    let m = manufactured(&spec, d, 0)?;

    let undo = m.scrambled.transform.inverse(1e-12)?;
    let (t_canon, sscf) = canonicalize_pair(&m.scf, Variant::Columns, 1e-9)?;
    let total = compose(&undo, &t_canon)?;
    let q = push_forward_rhs(&total, &m.q)?;
    let x0: Vec<f64> = m
        .x_scf
        .at(spec.interval.a())
        .iter()
        .take(d)
        .copied()
        .collect();
    let sol = solve_sscf(&sscf, &q, &x0, 1e-10)?;
    let (x, _) = pull_back(&total, &sol.x, &q, 1e-12)?;

    let res = residual(&m.scrambled.pair, &x, &m.q, 65)?;
    let err = grid(spec.interval, 65)
        .into_iter()
        .map(|s| (x.at(s) - m.x.at(s)).amax())
        .fold(0.0, f64::max);
    println!("free initial values: {}", sol.free_initial_dimension);
    println!("residual {res:.1e}, error against the known solution {err:.1e}");
    Ok(())
}
