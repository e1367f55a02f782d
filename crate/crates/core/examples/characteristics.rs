//! Characteristic values and Jordan structure of a nilpotent matrix with
//! blocks of orders 5, 5, 4, 4, 3, 2, 2, 1.

use sscf::structure::{
    characteristics_from_nilpotent, jordan_blocks, jordan_matrix, rank_profile,
    signature_from_characteristics, Variant,
};

fn main() -> sscf::Result<()> {
    let j = jordan_matrix(&[5, 5, 4, 4, 3, 2, 2, 1]);
    let ranks = rank_profile(&j)?;
    let c = characteristics_from_nilpotent(&j, ranks[0], 0)?;
    println!("m = {}, r = {}, mu = {}", c.m(), c.r(), c.mu());
    println!("ranks of powers: {ranks:?}");
    println!("thetas: {:?}", c.thetas());
    for (order, count) in jordan_blocks(&c)? {
        println!("  {count} block(s) of order {order}");
    }
    let col = signature_from_characteristics(&c, j.nrows(), Variant::Columns)?;
    let row = signature_from_characteristics(&c, j.nrows(), Variant::Rows)?;
    println!(
        "column signature {:?}, row signature {:?}",
        col.ells(),
        row.ells()
    );
    Ok(())
}
