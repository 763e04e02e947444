//! Deterministic dense linear algebra.
//!
//! Everything here is hand-rolled for two reasons: the crate stays
//! `no_std`-compatible, and results must be bit-identical for any thread
//! count. Parallel sections only ever partition independent outputs.

mod matrix;
pub mod solve;
pub mod svd;
pub mod sym;

pub use matrix::{for_each_mut, for_each_row_indexed, par_map_indexed, Mat};
pub use solve::{condition_number, lstsq, Lu};
pub use svd::thin_svd_exact;
pub use sym::{gram, gram_top_eigen};
