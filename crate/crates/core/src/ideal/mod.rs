//! Perfect-detector quantum trajectories: photon counting (jumps) and
//! homodyne detection (diffusive photocurrent).
//!
//! Steppers act on [`Hermitian`](crate::qops::Hermitian) coordinates through
//! precomputed superoperators. Both use positivity-preserving Kraus-form
//! updates that agree with the Itô equations to first order in dt; the
//! homodyne unraveling can also run the plain Euler–Maruyama update.

mod homodyne;
mod jump;
mod noise;

pub use homodyne::{homodyne_current, homodyne_sme_step, DiffusiveScheme, HomodyneUnraveling};
pub(crate) use jump::no_count_kraus;
pub use jump::{jump_expected_dn, jump_sme_step, JumpUnraveling};
pub use noise::{DiffusiveNoise, JumpNoise, NoiseSource, StepSize};

use rand::Rng;

/// Bernoulli draw with success probability `p` from a single uniform.
pub fn sample_flag(p: f64, rng: &mut impl Rng) -> bool {
    rng.random::<f64>() < p
}
