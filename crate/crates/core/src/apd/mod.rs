//! Photon counting with a realistic avalanche photodiode.
//!
//! The detector is ready (0), primed by an electron–hole pair that has not
//! yet avalanched (1), or dead after an avalanche (2). The conditioned
//! supersystem is the triple (ρ₀, ρ₁, ρ₂) with Tr ρᵢ the detector-state
//! probability and ρ₀ + ρ₁ + ρ₂ the system state.

mod filter;
mod params;
mod supersystem;

pub use filter::{
    adiabatic_ratio, apd_adiabatic_rho1, apd_skse_step, apd_step_ideal_limit, apd_step_no_deadtime, apd_step_no_state1,
    ApdFilter, ApdForm, ApdVariant,
};
pub use params::ApdParams;
pub use supersystem::{ApdSnapshot, ApdSupersystem, EXCLUSIVITY_TOL};
