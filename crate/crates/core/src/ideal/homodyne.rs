use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jump::check_efficiency;
use super::noise::StepSize;
use crate::error::{Error, Result};
use crate::qops::hermitian::{dot, Hermitian, SandwichTerm, Superop};
use crate::qops::operator::Operator;
use crate::qops::LindbladModel;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Update rule for the diffusive SME.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusiveScheme {
    /// ρ ← MρM† + (1−η)dt c_Φρc_Φ† with
    /// M = 1 − (iH + ½c†c)dt + J dt c_Φ + ½c_Φ²((J dt)² − η dt).
    /// Positivity-preserving, keeps pure states pure at η = 1.
    #[default]
    Kraus,
    /// ρ ← ρ + dt Lρ + (J − E[J])dt H[c_Φ]ρ.
    EulerMaruyama,
}

/// Precomputed maps for homodyne detection at efficiency η.
#[derive(Debug, Clone)]
pub struct HomodyneUnraveling {
    eta: f64,
    dt: f64,
    scheme: DiffusiveScheme,
    /// Kraus update as a polynomial in J dt, coefficients of powers 0..=4.
    powers: Vec<Superop>,
    drift: Superop,
    kick: Superop,
    quadrature: Vec<f64>,
}

impl HomodyneUnraveling {
    pub fn new(model: &LindbladModel, eta: f64, dt: StepSize, scheme: DiffusiveScheme) -> Result<Self> {
        check_efficiency(eta)?;
        let dim = model.dim();
        let dt = dt.get();
        let id = Operator::identity(dim);
        let c = model.collapse();
        let b = model.phased_collapse();
        let b2 = (&b * &b).scale_re(0.5);
        let a0 = &(&id - &(&model.hamiltonian().scale(I) + &(&c.dagger() * c).scale_re(0.5)).scale_re(dt))
            - &b2.scale_re(eta * dt);
        let t = SandwichTerm::new;
        let powers = vec![
            Superop::from_terms(dim, vec![t(1.0, a0.clone(), a0.clone()), t((1.0 - eta) * dt, b.clone(), b.clone())]),
            Superop::from_terms(dim, vec![t(1.0, b.clone(), a0.clone()), t(1.0, a0.clone(), b.clone())]),
            Superop::from_terms(
                dim,
                vec![t(1.0, b.clone(), b.clone()), t(1.0, b2.clone(), a0.clone()), t(1.0, a0.clone(), b2.clone())],
            ),
            Superop::from_terms(dim, vec![t(1.0, b2.clone(), b.clone()), t(1.0, b.clone(), b2.clone())]),
            Superop::from_terms(dim, vec![t(1.0, b2.clone(), b2)]),
        ];
        let drift = Superop::scalar(dim, 1.0).plus(&model.liouvillian_superop().scaled(dt));
        let kick = Superop::from_terms(dim, vec![t(1.0, b, id)])
            .plus(&Superop::from_terms(dim, vec![t(1.0, Operator::identity(dim), model.phased_collapse())]));
        let quadrature = kick.trace_functional();
        Ok(Self { eta, dt, scheme, powers, drift, kick, quadrature })
    }

    pub fn efficiency(&self) -> f64 {
        self.eta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> DiffusiveScheme {
        self.scheme
    }

    /// ⟨c e^{−iΦ} + c† e^{iΦ}⟩ for normalized ρ.
    pub fn quadrature(&self, rho: &Hermitian) -> f64 {
        dot(&self.quadrature, rho.coords())
    }

    /// E[J] = η⟨c e^{−iΦ} + c† e^{iΦ}⟩.
    pub fn expected_current(&self, rho: &Hermitian) -> f64 {
        self.eta * self.quadrature(rho)
    }

    /// J with J dt = E[J] dt + √η dW.
    pub fn current(&self, rho: &Hermitian, dw: f64) -> f64 {
        self.expected_current(rho) + self.eta.sqrt() * dw / self.dt
    }

    /// Advances `rho` by one step given the measured current `j`.
    pub fn step(&self, rho: &mut Hermitian, j: f64, scratch: &mut Hermitian) -> Result<()> {
        let x = j * self.dt;
        match self.scheme {
            DiffusiveScheme::Kraus => {
                let out = scratch.coords_mut();
                self.powers[0].apply_into(rho.coords(), out);
                let mut xp = 1.0;
                for p in &self.powers[1..] {
                    xp *= x;
                    p.apply_add(xp, rho.coords(), out);
                }
            }
            DiffusiveScheme::EulerMaruyama => {
                let innovation = x - self.expected_current(rho) * self.dt;
                let mean_kick = self.quadrature(rho);
                let out = scratch.coords_mut();
                self.drift.apply_into(rho.coords(), out);
                self.kick.apply_add(innovation, rho.coords(), out);
                for (o, r) in out.iter_mut().zip(rho.coords()) {
                    *o -= innovation * mean_kick * r;
                }
            }
        }
        let tr = scratch.trace();
        if !(tr > 0.0) || !scratch.is_finite() {
            return Err(Error::InvalidParameter(format!("homodyne step produced trace {tr}; reduce dt")));
        }
        rho.copy_from(scratch);
        rho.scale(1.0 / tr);
        Ok(())
    }
}

/// J = η⟨c e^{−iΦ} + c† e^{iΦ}⟩ + √η dW / dt.
pub fn homodyne_current(model: &LindbladModel, rho: &Operator, eta: f64, dw: f64, dt: f64) -> Result<f64> {
    model.hamiltonian().ensure_same_dim(rho)?;
    check_efficiency(eta)?;
    let b = model.phased_collapse();
    let x = (&b + &b.dagger()).expectation(rho).re;
    Ok(eta * x + eta.sqrt() * dw / StepSize::new(dt)?.get())
}

/// One step of the homodyne SME conditioned on the current `j`.
pub fn homodyne_sme_step(
    model: &LindbladModel,
    rho: &Operator,
    eta: f64,
    j: f64,
    dt: f64,
    scheme: DiffusiveScheme,
) -> Result<Operator> {
    model.hamiltonian().ensure_same_dim(rho)?;
    let unr = HomodyneUnraveling::new(model, eta, StepSize::new(dt)?, scheme)?;
    let mut h = Hermitian::from_operator(rho);
    let mut scratch = Hermitian::zeros(model.dim());
    unr.step(&mut h, j, &mut scratch)?;
    Ok(h.to_operator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::operator::trace_distance;
    use crate::qops::operator::two_level::*;
    use crate::qops::MePropagator;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn current_examples() {
        let m = LindbladModel::tla(1.0);
        assert_eq!(homodyne_current(&m, &ground(), 1.0, 0.0, 1e-3).unwrap(), 0.0);
        assert!((homodyne_current(&m, &plus_x(), 1.0, 0.0, 1e-3).unwrap() - 1.0).abs() < 1e-15);
        let unr = HomodyneUnraveling::new(&m, 1.0, StepSize::new(1e-3).unwrap(), DiffusiveScheme::Kraus).unwrap();
        assert!((unr.expected_current(&Hermitian::from_operator(&plus_x())) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampled_current_mean() {
        let m = LindbladModel::tla(1.0);
        let rho = from_bloch([0.6, 0.0, 0.0]);
        let (eta, dt) = (0.8, 1e-2f64);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            sum += homodyne_current(&m, &rho, eta, dw, dt).unwrap();
        }
        let se = (eta / dt / n as f64).sqrt();
        assert!((sum / n as f64 - eta * 0.6).abs() < 3.0 * se);
    }

    #[test]
    fn zero_innovation_follows_master_equation() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let dt = 1e-4;
        let unr = HomodyneUnraveling::new(&m, 0.9, StepSize::new(dt).unwrap(), DiffusiveScheme::EulerMaruyama).unwrap();
        let mut rho = Hermitian::from_operator(&ground());
        let mut scratch = Hermitian::zeros(m.dim());
        for _ in 0..10_000 {
            let j = unr.expected_current(&rho);
            unr.step(&mut rho, j, &mut scratch).unwrap();
        }
        let exact = MePropagator::new(&m).propagate(&ground(), 1.0).unwrap();
        assert!(trace_distance(&rho.to_operator(), &exact).unwrap() < 10.0 * dt);
    }

    #[test]
    fn pure_states_stay_pure_at_unit_efficiency() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let dt = 1e-4;
        let unr = HomodyneUnraveling::new(&m, 1.0, StepSize::new(dt).unwrap(), DiffusiveScheme::Kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rho = Hermitian::from_operator(&plus_x());
        let mut scratch = Hermitian::zeros(m.dim());
        for _ in 0..10_000 {
            let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let j = unr.current(&rho, dw);
            unr.step(&mut rho, j, &mut scratch).unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn schemes_agree_to_first_order() {
        let m = LindbladModel::driven_tla(0.7, 1.0).with_phase(0.4).unwrap();
        let rho = from_bloch([0.3, 0.2, -0.5]);
        for dt in [1e-3f64, 1e-4] {
            let j = 0.3 + 1.0 / dt.sqrt();
            let a = homodyne_sme_step(&m, &rho, 0.8, j, dt, DiffusiveScheme::Kraus).unwrap();
            let b = homodyne_sme_step(&m, &rho, 0.8, j, dt, DiffusiveScheme::EulerMaruyama).unwrap();
            // differ at O((J dt)²) = O(dt)
            assert!(a.max_abs_diff(&b) < 3.0 * dt, "dt = {dt}");
        }
    }

    #[test]
    fn ensemble_recovers_master_equation() {
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let dt = 1e-3;
        let unr = HomodyneUnraveling::new(&m, 0.8, StepSize::new(dt).unwrap(), DiffusiveScheme::Kraus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let traj = 400;
        let steps = 1500;
        let mut mean = Operator::zeros(m.dim());
        let mut scratch = Hermitian::zeros(m.dim());
        for _ in 0..traj {
            let mut rho = Hermitian::from_operator(&ground());
            for _ in 0..steps {
                let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let j = unr.current(&rho, dw);
                unr.step(&mut rho, j, &mut scratch).unwrap();
            }
            mean = &mean + &rho.to_operator();
        }
        mean = mean.scale_re(1.0 / traj as f64);
        let exact = MePropagator::new(&m).propagate(&ground(), steps as f64 * dt).unwrap();
        assert!(trace_distance(&mean, &exact).unwrap() < 3.0 / (traj as f64).sqrt());
    }
}
