use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ApdParams;
use super::supersystem::ApdSupersystem;
use crate::error::{Error, Result};
use crate::ideal::{JumpUnraveling, StepSize};
use crate::qops::hermitian::{dot, SandwichTerm, Superop};
use crate::qops::operator::TOL_JUMP_TRACE;
use crate::qops::{apply_j, Hermitian, LindbladModel, Operator};

/// Which detector states are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApdVariant {
    /// Ready, primed and dead states.
    Full,
    /// Instant response: pairs avalanche immediately (ready and dead states).
    NoState1,
    /// No dead time (ready and primed states).
    NoDeadTime,
    /// Instant response and no dead time: a single state.
    IdealLimit,
}

/// Whether the supersystem is renormalized every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApdForm {
    /// Nonlinear equations with the γ_r Tr[ρ₁] terms, renormalized each step.
    #[default]
    Normalized,
    /// Linear equations for unnormalized states; only rescaled to avoid underflow.
    Linear,
}

/// Step maps for one detector model at a fixed dt.
#[derive(Debug, Clone)]
pub struct ApdFilter {
    params: ApdParams,
    variant: ApdVariant,
    form: ApdForm,
    dt: f64,
    dead_steps: u64,
    unraveling: JumpUnraveling,
    free: Superop,
    feed: Superop,
    feed_rate: Vec<f64>,
    /// Jump map of the single-state limit.
    single_jump: Superop,
}

const MAX_STEP_PROBABILITY: f64 = 0.5;

impl ApdFilter {
    pub fn new(
        model: &LindbladModel,
        params: ApdParams,
        dt: StepSize,
        variant: ApdVariant,
        form: ApdForm,
    ) -> Result<Self> {
        params.validate()?;
        let dt_val = dt.get();
        let dead_steps = params.dead_steps(dt_val)?;
        if matches!(variant, ApdVariant::NoDeadTime | ApdVariant::IdealLimit) && dead_steps != 0 {
            return Err(Error::InvalidParameter(format!("{variant:?} requires zero dead time")));
        }
        if matches!(variant, ApdVariant::Full | ApdVariant::NoDeadTime)
            && params.response_rate * dt_val > MAX_STEP_PROBABILITY
        {
            return Err(Error::ProbabilityOverflow { prob: params.response_rate * dt_val });
        }
        if params.dark_rate * dt_val > MAX_STEP_PROBABILITY {
            return Err(Error::ProbabilityOverflow { prob: params.dark_rate * dt_val });
        }
        let dim = model.dim();
        let unraveling = JumpUnraveling::new(model, params.efficiency, dt)?;
        let bare = LindbladModel::without_lo(model.hamiltonian().clone(), model.collapse().clone(), 0.0)?;
        let free = JumpUnraveling::new(&bare, 0.0, dt)?.no_jump_map().clone();
        let feed = Superop::from_terms(
            dim,
            vec![
                SandwichTerm::jump(params.efficiency, model.displaced_collapse()),
                SandwichTerm::jump(params.dark_rate, Operator::identity(dim)),
            ],
        );
        let feed_rate = feed.trace_functional();
        let single_jump = if params.dark_rate == 0.0 { unraveling.jump_map().clone() } else { feed.clone() };
        Ok(Self { params, variant, form, dt: dt_val, dead_steps, unraveling, free, feed, feed_rate, single_jump })
    }

    pub fn params(&self) -> &ApdParams {
        &self.params
    }

    pub fn variant(&self) -> ApdVariant {
        self.variant
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dead_steps(&self) -> u64 {
        self.dead_steps
    }

    /// Ready detector holding `rho`.
    pub fn initial_state(&self, rho: &Operator) -> Result<ApdSupersystem> {
        self.unraveling_dim_check(rho)?;
        let mut s = ApdSupersystem::ready(rho)?;
        s.linear = self.form == ApdForm::Linear;
        Ok(s)
    }

    fn unraveling_dim_check(&self, rho: &Operator) -> Result<()> {
        if rho.n() != self.free.dim().get() {
            return Err(Error::DimensionMismatch { expected: self.free.dim().get(), got: rho.n() });
        }
        Ok(())
    }

    /// Rate Tr[(ηJ[c+μ] + γ_dk)ρ] at which a ready detector is primed.
    pub fn priming_rate(&self, rho: &Hermitian) -> f64 {
        dot(&self.feed_rate, rho.coords())
    }

    /// Probability of observing an avalanche in the next step.
    pub fn avalanche_probability(&self, s: &ApdSupersystem) -> Result<f64> {
        let total = s.rho.iter().map(Hermitian::trace).sum::<f64>();
        let p = match self.variant {
            ApdVariant::Full | ApdVariant::NoDeadTime => self.params.response_rate * s.rho[1].trace() / total * self.dt,
            ApdVariant::NoState1 | ApdVariant::IdealLimit => {
                if s.pending_reset.is_some() && s.pending_reset != Some(s.step) {
                    0.0
                } else {
                    self.priming_rate(&s.rho[0]) / total * self.dt
                }
            }
        };
        if p > MAX_STEP_PROBABILITY {
            return Err(Error::ProbabilityOverflow { prob: p });
        }
        Ok(p.max(0.0))
    }

    /// Draws the avalanche flag for the next step and applies it.
    pub fn sample_step(&self, s: &mut ApdSupersystem, rng: &mut impl Rng) -> Result<bool> {
        let due = s.pending_reset == Some(s.step);
        if due {
            reset(s);
        }
        let p = self.avalanche_probability(s)?;
        let flag = rng.random::<f64>() < p;
        self.step(s, flag)?;
        Ok(flag)
    }

    /// Advances by one step given the observed avalanche flag.
    pub fn step(&self, s: &mut ApdSupersystem, avalanche: bool) -> Result<()> {
        if s.pending_reset == Some(s.step) {
            reset(s);
        }
        if avalanche {
            if let Some(r) = s.pending_reset {
                return Err(Error::AvalancheDuringDeadTime { step: s.step, reset_step: r });
            }
            self.avalanche(s)?;
        } else {
            self.evolve(s);
        }
        self.finish(s)
    }

    fn avalanche(&self, s: &mut ApdSupersystem) -> Result<()> {
        let total = s.rho.iter().map(Hermitian::trace).sum::<f64>();
        let dim = s.dim();
        match self.variant {
            ApdVariant::Full | ApdVariant::NoDeadTime => {
                let t1 = s.rho[1].trace();
                if !(t1 / total > TOL_JUMP_TRACE) {
                    return Err(Error::VanishingJumpProbability { trace: t1 / total });
                }
                let mut landed = std::mem::replace(&mut s.rho[1], Hermitian::zeros(dim));
                if self.form == ApdForm::Normalized {
                    landed.scale(1.0 / t1);
                }
                s.rho[0].set_zero();
                self.land(s, landed);
            }
            ApdVariant::NoState1 => {
                let mut landed = self.feed.apply(&s.rho[0]);
                let rate = landed.trace();
                if !(rate / total > TOL_JUMP_TRACE) {
                    return Err(Error::VanishingJumpProbability { trace: rate / total });
                }
                match self.form {
                    ApdForm::Normalized => landed.scale(1.0 / rate),
                    ApdForm::Linear => landed.scale(self.dt),
                }
                s.rho[0].set_zero();
                self.land(s, landed);
            }
            ApdVariant::IdealLimit => {
                let mut out = Hermitian::zeros(dim);
                self.single_jump.apply_into(s.rho[0].coords(), out.coords_mut());
                let tr = out.trace();
                if !(tr / total > TOL_JUMP_TRACE) {
                    return Err(Error::VanishingJumpProbability { trace: tr / total });
                }
                s.rho[0] = out;
            }
        }
        Ok(())
    }

    /// Places the post-avalanche state in the dead slot, or straight back in
    /// the ready slot when there is no dead time.
    fn land(&self, s: &mut ApdSupersystem, landed: Hermitian) {
        if self.variant == ApdVariant::NoDeadTime || self.dead_steps == 0 {
            s.rho[0] = landed;
            s.rho[2].set_zero();
            s.pending_reset = None;
        } else {
            s.rho[2] = landed;
            s.pending_reset = Some(s.step + self.dead_steps);
        }
    }

    fn evolve(&self, s: &mut ApdSupersystem) {
        let dt = self.dt;
        let (gr, gdk) = (self.params.response_rate, self.params.dark_rate);
        let normalized = self.form == ApdForm::Normalized;
        let dim = s.dim();
        let no_count = self.unraveling.no_jump_map();
        match self.variant {
            ApdVariant::IdealLimit => {
                let mut out = Hermitian::zeros(dim);
                no_count.apply_into(s.rho[0].coords(), out.coords_mut());
                s.rho[0] = out;
            }
            ApdVariant::NoState1 => {
                let keep = if normalized { 1.0 + dt * (self.priming_rate(&s.rho[0]) - gdk) } else { 1.0 - dt * gdk };
                let mut out0 = Hermitian::zeros(dim);
                if !is_zero(&s.rho[0]) {
                    no_count.apply_add(keep, s.rho[0].coords(), out0.coords_mut());
                }
                let out2 = self.free_step(&s.rho[2]);
                s.rho[0] = out0;
                s.rho[2] = out2;
            }
            ApdVariant::Full | ApdVariant::NoDeadTime => {
                let t1 = if normalized { s.rho[1].trace() } else { 0.0 };
                let mut out0 = Hermitian::zeros(dim);
                let mut out1 = Hermitian::zeros(dim);
                if !is_zero(&s.rho[0]) {
                    no_count.apply_add(1.0 + dt * (gr * t1 - gdk), s.rho[0].coords(), out0.coords_mut());
                    self.feed.apply_add(dt, s.rho[0].coords(), out1.coords_mut());
                }
                if !is_zero(&s.rho[1]) {
                    self.free.apply_add(1.0 + dt * (gr * t1 - gr), s.rho[1].coords(), out1.coords_mut());
                }
                let out2 = self.free_step(&s.rho[2]);
                s.rho = [out0, out1, out2];
            }
        }
    }

    fn free_step(&self, rho: &Hermitian) -> Hermitian {
        let mut out = Hermitian::zeros(rho.dim());
        if !is_zero(rho) {
            self.free.apply_into(rho.coords(), out.coords_mut());
        }
        out
    }

    fn finish(&self, s: &mut ApdSupersystem) -> Result<()> {
        let total = s.rho.iter().map(Hermitian::trace).sum::<f64>();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParameter(format!("supersystem trace {total}; reduce dt")));
        }
        match self.form {
            ApdForm::Normalized => {
                let inv = 1.0 / total;
                for r in &mut s.rho {
                    r.scale(inv);
                }
            }
            ApdForm::Linear => {
                if !(1e-100..=1e100).contains(&total) {
                    for r in &mut s.rho {
                        r.scale(1.0 / total);
                    }
                    s.log_scale += total.ln();
                }
            }
        }
        s.step += 1;
        Ok(())
    }
}

fn reset(s: &mut ApdSupersystem) {
    let dim = s.dim();
    let dead = std::mem::replace(&mut s.rho[2], Hermitian::zeros(dim));
    s.rho[0].axpy(1.0, &dead);
    s.pending_reset = None;
}

fn is_zero(h: &Hermitian) -> bool {
    h.coords().iter().all(|&x| x == 0.0)
}

fn one_step(
    model: &LindbladModel,
    p: &ApdParams,
    s: &ApdSupersystem,
    avalanche: bool,
    dt: f64,
    variant: ApdVariant,
) -> Result<ApdSupersystem> {
    let f = ApdFilter::new(model, *p, StepSize::new(dt)?, variant, ApdForm::Normalized)?;
    let mut next = s.clone();
    f.step(&mut next, avalanche)?;
    Ok(next)
}

/// One step of the full three-state detector.
pub fn apd_skse_step(
    model: &LindbladModel,
    p: &ApdParams,
    s: &ApdSupersystem,
    avalanche: bool,
    dt: f64,
) -> Result<ApdSupersystem> {
    one_step(model, p, s, avalanche, dt, ApdVariant::Full)
}

/// One step with the primed state eliminated (γ_r → ∞).
pub fn apd_step_no_state1(
    model: &LindbladModel,
    p: &ApdParams,
    s: &ApdSupersystem,
    avalanche: bool,
    dt: f64,
) -> Result<ApdSupersystem> {
    one_step(model, p, s, avalanche, dt, ApdVariant::NoState1)
}

/// One step with zero dead time.
pub fn apd_step_no_deadtime(
    model: &LindbladModel,
    p: &ApdParams,
    s: &ApdSupersystem,
    avalanche: bool,
    dt: f64,
) -> Result<ApdSupersystem> {
    one_step(model, p, s, avalanche, dt, ApdVariant::NoDeadTime)
}

/// One step of the single-state limit (instant response, no dead time).
pub fn apd_step_ideal_limit(
    model: &LindbladModel,
    p: &ApdParams,
    rho: &Operator,
    avalanche: bool,
    dt: f64,
) -> Result<Operator> {
    let f = ApdFilter::new(model, *p, StepSize::new(dt)?, ApdVariant::IdealLimit, ApdForm::Normalized)?;
    let mut s = f.initial_state(rho)?;
    f.step(&mut s, avalanche)?;
    Ok(s.component(0))
}

/// Primed-state weight slaved to the ready state when γ_r dominates:
/// (ηJ[c+μ] + γ_dk)ρ₀ / γ_r.
pub fn apd_adiabatic_rho1(model: &LindbladModel, p: &ApdParams, rho0: &Operator) -> Result<Operator> {
    p.validate()?;
    let primed = &apply_j(&model.displaced_collapse(), rho0)?.scale_re(p.efficiency) + &rho0.scale_re(p.dark_rate);
    Ok(primed.scale_re(1.0 / p.response_rate))
}

/// γ_r divided by the spectral radius of the Liouvillian; elimination of the
/// primed state is accurate when this is large (≳ 10).
pub fn adiabatic_ratio(model: &LindbladModel, p: &ApdParams) -> f64 {
    let l = model.vectorized_liouvillian();
    let radius = l
        .clone()
        .schur()
        .eigenvalues()
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or_else(|| l.iter().map(|z| z.norm()).sum());
    p.response_rate / radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::jump_sme_step;
    use crate::qops::operator::trace_distance;
    use crate::qops::two_level::*;
    use num_complex::Complex64;
    use rand::SeedableRng;

    fn params(eta: f64, dark: f64, response: f64, dead: f64) -> ApdParams {
        ApdParams::new(eta, dark, response, dead).unwrap()
    }

    fn filter(m: &LindbladModel, p: ApdParams, dt: f64, v: ApdVariant) -> ApdFilter {
        ApdFilter::new(m, p, StepSize::new(dt).unwrap(), v, ApdForm::Normalized).unwrap()
    }

    #[test]
    fn avalanche_moves_primed_state_to_dead_slot() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(0.8, 0.1, 10.0, 0.5);
        let s = ApdSupersystem::from_parts(
            [&ground().scale_re(0.6), &plus_x().scale_re(0.4), &Operator::zeros(m.dim())],
            7,
            None,
        )
        .unwrap();
        let next = apd_skse_step(&m, &p, &s, true, 1e-3).unwrap();
        assert!(next.component(2).max_abs_diff(&plus_x()) < 1e-14);
        assert_eq!(next.traces()[0], 0.0);
        assert_eq!(next.traces()[1], 0.0);
        assert_eq!(next.pending_reset(), Some(7 + 500));
        next.check_invariants().unwrap();
    }

    #[test]
    fn reset_returns_dead_state_to_ready() {
        let m = LindbladModel::tla(1.0);
        let p = params(0.8, 0.0, 10.0, 0.5);
        let zero = Operator::zeros(m.dim());
        let s = ApdSupersystem::from_parts([&zero, &zero, &plus_x()], 500, Some(500)).unwrap();
        let next = apd_skse_step(&m, &p, &s, false, 1e-3).unwrap();
        assert_eq!(next.pending_reset(), None);
        assert_eq!(next.traces()[2], 0.0);
        assert!(trace_distance(&next.component(0), &plus_x()).unwrap() < 1e-2);
        next.check_invariants().unwrap();
    }

    #[test]
    fn vacuum_never_avalanches() {
        let m = LindbladModel::tla(0.0);
        let p = params(1.0, 0.0, 10.0, 0.5);
        let f = filter(&m, p, 1e-3, ApdVariant::Full);
        let mut s = f.initial_state(&excited()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5000 {
            assert!(!f.sample_step(&mut s, &mut rng).unwrap());
        }
        assert!((s.traces()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn avalanche_in_dead_time_rejected() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(1.0, 0.0, 10.0, 0.01);
        let zero = Operator::zeros(m.dim());
        let s = ApdSupersystem::from_parts([&zero, &ground(), &zero], 0, None).unwrap();
        let s = apd_skse_step(&m, &p, &s, true, 1e-3).unwrap();
        assert!(matches!(
            apd_skse_step(&m, &p, &s, true, 1e-3),
            Err(Error::AvalancheDuringDeadTime { step: 1, reset_step: 10 })
        ));
    }

    #[test]
    fn avalanche_without_primed_weight_fails() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(1.0, 0.0, 10.0, 0.0);
        let s = ApdSupersystem::ready(&ground()).unwrap();
        assert!(matches!(apd_skse_step(&m, &p, &s, true, 1e-3), Err(Error::VanishingJumpProbability { .. })));
    }

    #[test]
    fn slaved_primed_state() {
        let m = LindbladModel::tla(1.0);
        let p = params(0.7, 0.0, 50.0, 0.0);
        let r = apd_adiabatic_rho1(&m, &p, &ground()).unwrap();
        assert_eq!(r, Operator::zeros(m.dim()));

        let m = LindbladModel::driven_tla(1.0, 1.0).with_lo(Complex64::new(0.5, 0.5));
        let p = params(0.7, 0.3, 50.0, 0.0);
        let rho0 = from_bloch([0.2, 0.4, -0.1]).scale_re(0.9);
        let r = apd_adiabatic_rho1(&m, &p, &rho0).unwrap();
        let b = m.displaced_collapse();
        let want = (0.7 * (&b.dagger() * &b).expectation(&rho0).re + 0.3 * 0.9) / 50.0;
        assert!((r.trace().re - want).abs() < 1e-15);
        assert!(adiabatic_ratio(&m, &p) > 1.0);
    }

    #[test]
    fn direct_dead_state_after_photon() {
        let m = LindbladModel::tla(1.0);
        let p = params(0.9, 0.0, 10.0, 0.5);
        let s = ApdSupersystem::ready(&excited()).unwrap();
        let next = apd_step_no_state1(&m, &p, &s, true, 1e-3).unwrap();
        assert!(next.component(2).max_abs_diff(&ground()) < 1e-14);
        next.check_invariants().unwrap();
    }

    #[test]
    fn dominant_dark_counts_barely_disturb() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(0.5, 200.0, 10.0, 0.5);
        let rho0 = from_bloch([0.3, -0.2, 0.5]);
        let s = ApdSupersystem::ready(&rho0).unwrap();
        let next = apd_step_no_state1(&m, &p, &s, true, 1e-3).unwrap();
        let d = trace_distance(&next.component(2), &rho0).unwrap();
        let jumped = apply_j(&m.displaced_collapse(), &rho0).unwrap().trace().re;
        assert!(d < 2.0 * 0.5 * jumped / 200.0);
    }

    #[test]
    fn zero_dead_time_returns_to_ready() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(1.0, 0.0, 10.0, 0.0);
        let zero = Operator::zeros(m.dim());
        let s = ApdSupersystem::from_parts([&zero, &plus_x(), &zero], 0, None).unwrap();
        let next = apd_step_no_deadtime(&m, &p, &s, true, 1e-3).unwrap();
        let r0 = next.component(0);
        assert!((r0.purity() - 1.0).abs() < 1e-12);
        assert!(next.pending_reset().is_none());
        // a second avalanche right away is allowed here
        let s2 = ApdSupersystem::from_parts([&zero, &plus_x(), &zero], 0, None).unwrap();
        let again = apd_step_no_deadtime(&m, &p, &s2, true, 1e-3).unwrap();
        assert!(again.check_invariants().is_ok());
    }

    #[test]
    fn single_state_limit_is_jump_sme_without_dark_counts() {
        let m = LindbladModel::driven_tla(1.0, 1.0).with_lo(Complex64::new(0.2, -0.4));
        let p = params(0.8, 0.0, 10.0, 0.0);
        let rho = from_bloch([0.1, 0.3, 0.2]);
        for flag in [false, true] {
            let a = apd_step_ideal_limit(&m, &p, &rho, flag, 1e-3).unwrap();
            let b = jump_sme_step(&m, &rho, 0.8, flag, 1e-3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pure_dark_counts_leave_state_alone() {
        let m = LindbladModel::without_lo(sigma_x(), Operator::zeros(crate::qops::HilbertDim::new(2).unwrap()), 0.0)
            .unwrap();
        let p = params(0.8, 5.0, 10.0, 0.0);
        let rho = from_bloch([0.1, 0.3, 0.2]);
        let after = apd_step_ideal_limit(&m, &p, &rho, true, 1e-3).unwrap();
        assert!(after.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn linear_form_matches_normalized_form() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = params(0.8, 0.1, 10.0, 0.05);
        let dt = 1e-3;
        let fa = filter(&m, p, dt, ApdVariant::Full);
        let fb = ApdFilter::new(&m, p, StepSize::new(dt).unwrap(), ApdVariant::Full, ApdForm::Linear).unwrap();
        let mut a = fa.initial_state(&ground()).unwrap();
        let mut b = fb.initial_state(&ground()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5000 {
            let flag = fa.sample_step(&mut a, &mut rng).unwrap();
            fb.step(&mut b, flag).unwrap();
            let pa = a.probabilities();
            let pb = b.probabilities();
            assert!((pa[1] - pb[1]).abs() < 0.02);
        }
        assert!(trace_distance(&a.conditioned_state(), &b.conditioned_state()).unwrap() < 0.02);
    }
}
