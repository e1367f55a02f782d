//! Write a small reproducible corpus to a temporary directory and read it
//! back.

use sscf::genbench::{export_corpus, import_corpus, GenSpec, Instance};
use sscf::structure::{BlockSignature, Variant};

fn main() -> sscf::Result<()> {
    let spec = GenSpec::new(
        BlockSignature::new(vec![3, 2, 1])?,
        Variant::Columns,
        1,
        2024,
    )?;
    let instances = (0..4)
        .map(|i| Instance::generate(&spec, i))
        .collect::<sscf::Result<Vec<_>>>()?;
    let dir = std::env::temp_dir().join("sscf-corpus-example");
    let manifest = export_corpus(&dir, &instances)?;
    for e in &manifest.instances {
        println!("{} seed {} {:?}", e.file, e.seed, e.sig.ells());
    }
    let back = import_corpus(&dir)?;
    let same = back.iter().zip(&instances).all(|(a, b)| a.n == b.n);
    println!(
        "{} instances in {}, round trip exact: {same}",
        back.len(),
        dir.display()
    );
    Ok(())
}
