pub mod canon_col;
pub mod canon_row;
pub mod chebmat;
pub mod cli;
pub mod dae;
pub mod equivalence;
pub mod error;
pub mod genbench;
pub mod structure;

pub use error::{Error, ErrorKind, Result};
