// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apd;
pub mod classical;
pub mod error;
pub mod harness;
pub mod ideal;
pub mod qops;
pub mod receiver;

pub use error::{Error, Result};
