//! Reduce a random time-varying column-variant matrix to its constant
//! elementary form and check the transform.

use sscf::canon_col::{canonicalize_col_traced, kappa_sequence, PipelineOptions};
use sscf::chebmat::{grid, norm_inf};
use sscf::genbench::{random_sut, GenSpec};
use sscf::structure::{BlockSignature, Variant};

fn main() -> sscf::Result<()> {
    let sig = BlockSignature::new(vec![4, 3, 2, 1])?;
    let spec = GenSpec::new(sig.clone(), Variant::Columns, 2, 7)?;
    let n = random_sut(&spec)?;
    println!("input: m = {}, entry degree {}", sig.m(), n.n().degree());

    let (t, target, trace) = canonicalize_col_traced(&n, &PipelineOptions::with_tol(1e-9))?;
    for step in &trace.steps {
        println!(
            "step {}: {} trailing rows fixed, {} observed",
            step.k, step.fixed, step.observed
        );
    }
    println!("kappa = {:?}", kappa_sequence(&sig));
    println!("target:\n{target}");

    let worst = grid(n.n().interval(), 65)
        .into_iter()
        .map(|s| norm_inf(&(t.l().at(s) * n.n().at(s) * t.k().at(s) - &target)))
        .fold(0.0, f64::max);
    println!("|L N K - target| = {worst:.1e}");
    Ok(())
}
