//! Operators, superoperators and the unconditioned master equation.

pub mod hermitian;
pub mod json;
pub mod lindblad;
pub mod operator;
pub mod superops;
#[cfg(test)]
pub(crate) mod testutil;

pub use hermitian::{Hermitian, SandwichTerm, Superop};
pub use lindblad::{liouvillian, me_propagate, me_steady_state, LindbladModel, MePropagator};
pub use operator::{trace_distance, two_level, HilbertDim, Operator};
pub use superops::{apply_a, apply_d, apply_g, apply_h, apply_j};
