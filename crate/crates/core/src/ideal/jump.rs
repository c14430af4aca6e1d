use num_complex::Complex64;

use super::noise::StepSize;
use crate::error::{Error, Result};
use crate::qops::hermitian::{dot, Hermitian, SandwichTerm, Superop};
use crate::qops::operator::{Operator, TOL_JUMP_TRACE};
use crate::qops::LindbladModel;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Precomputed maps for photon counting at efficiency η.
///
/// No-count step: ρ ← (1 − K dt)ρ(1 − K dt)† + (1−η)dt cρc†, with
/// K = iH + ½c†c + ημ*c + ½η|μ|², then renormalized. Count: ρ ← J[c+μ]ρ / Tr.
#[derive(Debug, Clone)]
pub struct JumpUnraveling {
    eta: f64,
    dt: f64,
    no_jump: Superop,
    jump: Superop,
    rate: Vec<f64>,
}

/// 1 − K dt for the no-count evolution of a photon counter at efficiency η.
pub(crate) fn no_count_kraus(model: &LindbladModel, eta: f64, dt: f64) -> Operator {
    let c = model.collapse();
    let mu = model.lo_amplitude();
    let k = &(&model.hamiltonian().scale(I) + &(&c.dagger() * c).scale_re(0.5)) + &c.scale(mu.conj() * eta);
    let k = k.shifted(Complex64::new(0.5 * eta * mu.norm_sqr(), 0.0));
    &Operator::identity(model.dim()) - &k.scale_re(dt)
}

pub(crate) fn check_efficiency(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("efficiency {eta} outside [0, 1]")))
    }
}

impl JumpUnraveling {
    pub fn new(model: &LindbladModel, eta: f64, dt: StepSize) -> Result<Self> {
        check_efficiency(eta)?;
        let dim = model.dim();
        let dt = dt.get();
        let m = no_count_kraus(model, eta, dt);
        let no_jump = Superop::from_terms(
            dim,
            vec![SandwichTerm::jump(1.0, m), SandwichTerm::jump((1.0 - eta) * dt, model.collapse().clone())],
        );
        let jump = Superop::from_terms(dim, vec![SandwichTerm::jump(eta, model.displaced_collapse())]);
        let rate = jump.trace_functional();
        Ok(Self { eta, dt, no_jump, jump, rate })
    }

    pub fn efficiency(&self) -> f64 {
        self.eta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub(crate) fn jump_map(&self) -> &Superop {
        &self.jump
    }

    pub(crate) fn no_jump_map(&self) -> &Superop {
        &self.no_jump
    }

    /// η Tr[(c†+μ*)(c+μ)ρ] for normalized ρ.
    pub fn count_rate(&self, rho: &Hermitian) -> f64 {
        dot(&self.rate, rho.coords())
    }

    /// E[dN] = count rate · dt; fails when above 0.5.
    pub fn expected_dn(&self, rho: &Hermitian) -> Result<f64> {
        let p = self.count_rate(rho) * self.dt;
        if p > 0.5 {
            return Err(Error::ProbabilityOverflow { prob: p });
        }
        Ok(p)
    }

    /// Advances `rho` by one step given the count flag; `scratch` must have the same dimension.
    pub fn step(&self, rho: &mut Hermitian, dn: bool, scratch: &mut Hermitian) -> Result<()> {
        let map = if dn { &self.jump } else { &self.no_jump };
        map.apply_into(rho.coords(), scratch.coords_mut());
        let tr = scratch.trace();
        if dn && !(tr > TOL_JUMP_TRACE) {
            return Err(Error::VanishingJumpProbability { trace: tr });
        }
        rho.copy_from(scratch);
        rho.scale(1.0 / tr);
        Ok(())
    }
}

/// η Tr[(c†+μ*)(c+μ)ρ] dt.
pub fn jump_expected_dn(model: &LindbladModel, rho: &Operator, eta: f64, dt: f64) -> Result<f64> {
    model.hamiltonian().ensure_same_dim(rho)?;
    check_efficiency(eta)?;
    let b = model.displaced_collapse();
    let p = eta * (&b.dagger() * &b).expectation(rho).re * dt;
    if p > 0.5 {
        return Err(Error::ProbabilityOverflow { prob: p });
    }
    Ok(p)
}

/// One step of the photon-counting SME conditioned on `dn`.
pub fn jump_sme_step(model: &LindbladModel, rho: &Operator, eta: f64, dn: bool, dt: f64) -> Result<Operator> {
    model.hamiltonian().ensure_same_dim(rho)?;
    let unr = JumpUnraveling::new(model, eta, StepSize::new(dt)?)?;
    let mut h = Hermitian::from_operator(rho);
    unr.expected_dn(&h)?;
    let mut scratch = Hermitian::zeros(model.dim());
    unr.step(&mut h, dn, &mut scratch)?;
    Ok(h.to_operator())
}
