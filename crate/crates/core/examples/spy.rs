//! Nonzero patterns of the powers of an elementary matrix, printed as ASCII.
//! The same panels back the `spy` subcommand.

use sscf::chebmat::{Interval, MatrixFunction};
use sscf::cli::spy;
use sscf::structure::{elementary, BlockSignature, Variant};

fn main() -> sscf::Result<()> {
    let sig = BlockSignature::new(vec![3, 2, 2, 1])?;
    let e = elementary(&sig, Variant::Columns)?;
    let n = MatrixFunction::constant(e, Interval::unit());
    let panels = spy::panels(&n, sig.mu(), 1e-12, 9)?;
    print!("{}", spy::ascii(&panels));
    Ok(())
}
