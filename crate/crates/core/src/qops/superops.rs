//! The superoperators of photodetection theory.
//!
//! For arbitrary operators B and ρ:
//!
//! ```text
//! J[B]ρ = BρB†
//! A[B]ρ = ½(B†Bρ + ρB†B)
//! D[B]ρ = J[B]ρ − A[B]ρ
//! G[A]B = J[A]B / Tr[J[A]B] − B
//! H[A]B = AB + BA† − Tr[AB + BA†] B
//! ```
//!
//! J, A and D are linear; G and H are the nonlinear (state-normalizing)
//! superoperators that appear in the conditioned master equations.

use num_complex::Complex64;

use super::operator::{Operator, TOL_JUMP_TRACE};
use crate::error::{Error, Result};

pub fn apply_j(b: &Operator, rho: &Operator) -> Result<Operator> {
    b.ensure_same_dim(rho)?;
    Ok(&(b * rho) * &b.dagger())
}

pub fn apply_a(b: &Operator, rho: &Operator) -> Result<Operator> {
    b.ensure_same_dim(rho)?;
    let bdb = &b.dagger() * b;
    Ok((&(&bdb * rho) + &(rho * &bdb)).scale_re(0.5))
}

pub fn apply_d(b: &Operator, rho: &Operator) -> Result<Operator> {
    Ok(&apply_j(b, rho)? - &apply_a(b, rho)?)
}

pub fn apply_g(a: &Operator, b: &Operator) -> Result<Operator> {
    let jumped = apply_j(a, b)?;
    let tr = jumped.trace().re;
    if !(tr > TOL_JUMP_TRACE) {
        return Err(Error::VanishingJumpProbability { trace: tr });
    }
    Ok(&jumped.scale_re(1.0 / tr) - b)
}

pub fn apply_h(a: &Operator, b: &Operator) -> Result<Operator> {
    a.ensure_same_dim(b)?;
    let sum = &(a * b) + &(b * &a.dagger());
    let tr: Complex64 = sum.trace();
    Ok(&sum - &b.scale(tr))
}
