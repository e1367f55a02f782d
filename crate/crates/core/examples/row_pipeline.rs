//! The row variant: block sizes increase and the leading columns settle
//! first.

use sscf::canon_col::PipelineOptions;
use sscf::canon_row::{canonicalize_row_traced, lambda_sequence};
use sscf::genbench::{random_sut, GenSpec};
use sscf::structure::{BlockSignature, Variant};

fn main() -> sscf::Result<()> {
    let sig = BlockSignature::new(vec![2, 4, 5, 7, 8])?;
    let spec = GenSpec::new(sig.clone(), Variant::Rows, 1, 11)?;
    let n = random_sut(&spec)?;
    let (_, target, trace) = canonicalize_row_traced(&n, &PipelineOptions::with_tol(1e-9))?;
    println!("lambda   = {:?}", lambda_sequence(&sig));
    println!(
        "observed = {:?}",
        trace.steps.iter().map(|s| s.observed).collect::<Vec<_>>()
    );
    println!(
        "nonzeros in target: {}",
        target.iter().filter(|x| **x != 0.0).count()
    );
    Ok(())
}
