use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::hermitian::{SandwichTerm, Superop};
use super::operator::{HilbertDim, Operator, TOL_HERM};
use super::superops::apply_d;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// System Hamiltonian, collapse operator and local-oscillator settings.
///
/// Time is measured in units where the photon flux out of the system is
/// ⟨c†c⟩; a two-level atom with `decay = 1` therefore reproduces those units.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    h: Operator,
    c: Operator,
    mu: Complex64,
    phi: f64,
}

impl LindbladModel {
    /// `phi` must equal arg(μ) whenever μ ≠ 0.
    pub fn new(h: Operator, c: Operator, mu: Complex64, phi: f64) -> Result<Self> {
        h.ensure_same_dim(&c)?;
        let herm = h.hermiticity_error();
        if herm > TOL_HERM {
            return Err(Error::InvalidParameter(format!("Hamiltonian is not Hermitian (error {herm:e})")));
        }
        if !phi.is_finite() || !mu.re.is_finite() || !mu.im.is_finite() {
            return Err(Error::InvalidParameter("non-finite LO parameters".into()));
        }
        if mu.norm() > 0.0 {
            let diff = (phi - mu.arg()).rem_euclid(std::f64::consts::TAU);
            let diff = diff.min(std::f64::consts::TAU - diff);
            if diff > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "LO phase {phi} inconsistent with arg(mu) = {}",
                    mu.arg()
                )));
            }
        }
        Ok(Self { h, c, mu, phi })
    }

    /// Model without a local oscillator, homodyne phase `phi`.
    pub fn without_lo(h: Operator, c: Operator, phi: f64) -> Result<Self> {
        Self::new(h, c, Complex64::new(0.0, 0.0), phi)
    }

    /// Undriven two-level atom decaying at `decay`.
    pub fn tla(decay: f64) -> Self {
        Self::driven_tla(0.0, decay)
    }

    /// Two-level atom with H = Ω σ_x / 2 and c = √decay σ₋.
    pub fn driven_tla(omega: f64, decay: f64) -> Self {
        use super::operator::two_level::*;
        Self {
            h: sigma_x().scale_re(omega / 2.0),
            c: sigma_minus().scale_re(decay.sqrt()),
            mu: Complex64::new(0.0, 0.0),
            phi: 0.0,
        }
    }

    /// Replaces the LO amplitude; the phase follows arg(μ) when μ ≠ 0.
    pub fn with_lo(mut self, mu: Complex64) -> Self {
        self.mu = mu;
        if mu.norm() > 0.0 {
            self.phi = mu.arg();
        }
        self
    }

    /// Sets the homodyne phase of an LO-free model.
    pub fn with_phase(self, phi: f64) -> Result<Self> {
        Self::new(self.h, self.c, self.mu, phi)
    }

    pub fn dim(&self) -> HilbertDim {
        self.h.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn collapse(&self) -> &Operator {
        &self.c
    }

    pub fn lo_amplitude(&self) -> Complex64 {
        self.mu
    }

    pub fn lo_phase(&self) -> f64 {
        self.phi
    }

    /// c + μ
    pub fn displaced_collapse(&self) -> Operator {
        self.c.shifted(self.mu)
    }

    /// e^{−iΦ} c
    pub fn phased_collapse(&self) -> Operator {
        self.c.scale(Complex64::from_polar(1.0, -self.phi))
    }

    /// Superoperator form of L = −i[H,·] + D[c].
    pub fn liouvillian_superop(&self) -> Superop {
        let dim = self.dim();
        let id = Operator::identity(dim);
        let mih = self.h.scale(-I);
        let cdc = &self.c.dagger() * &self.c;
        Superop::from_terms(
            dim,
            vec![
                SandwichTerm::new(1.0, mih.clone(), id.clone()),
                SandwichTerm::new(1.0, id.clone(), mih),
                SandwichTerm::jump(1.0, self.c.clone()),
                SandwichTerm::new(-0.5, cdc.clone(), id.clone()),
                SandwichTerm::new(-0.5, id, cdc),
            ],
        )
    }

    /// Column-stacked complex matrix of L acting on vec(ρ).
    pub fn vectorized_liouvillian(&self) -> DMatrix<Complex64> {
        let n = self.dim().get();
        let id = DMatrix::<Complex64>::identity(n, n);
        let h = self.h.matrix();
        let c = self.c.matrix();
        let cdc = c.adjoint() * c;
        // vec(AXB) = (Bᵀ ⊗ A) vec(X)
        let comm = id.kronecker(&(h * (-I))) + h.transpose().kronecker(&id) * I;
        let jump = c.map(|z| z.conj()).kronecker(c);
        let anti = id.kronecker(&cdc) + cdc.transpose().kronecker(&id);
        comm + jump - anti * Complex64::new(0.5, 0.0)
    }
}

/// L ρ = −i[H, ρ] + D[c]ρ
pub fn liouvillian(model: &LindbladModel, rho: &Operator) -> Result<Operator> {
    model.hamiltonian().ensure_same_dim(rho)?;
    let comm = model.hamiltonian().commutator(rho).scale(-I);
    Ok(&comm + &apply_d(model.collapse(), rho)?)
}

fn vec_of(rho: &Operator) -> DVector<Complex64> {
    DVector::from_column_slice(rho.matrix().as_slice())
}

fn unvec(n: usize, v: &DVector<Complex64>) -> Operator {
    Operator::from_matrix_unchecked(DMatrix::from_column_slice(n, n, v.as_slice()))
}

/// Exact master-equation propagator e^{Lt} from the matrix exponential of
/// the vectorized Liouvillian. Independent of the time-stepping code.
#[derive(Debug, Clone)]
pub struct MePropagator {
    n: usize,
    generator: DMatrix<Complex64>,
}

impl MePropagator {
    pub fn new(model: &LindbladModel) -> Self {
        Self { n: model.dim().get(), generator: model.vectorized_liouvillian() }
    }

    pub fn propagate(&self, rho0: &Operator, t: f64) -> Result<Operator> {
        if rho0.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: rho0.n() });
        }
        if t < 0.0 || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("propagation time {t}")));
        }
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        let prop = (&self.generator * Complex64::new(t, 0.0)).exp();
        Ok(unvec(self.n, &(prop * vec_of(rho0))))
    }

    /// States at `times` (each measured from t = 0).
    pub fn series(&self, rho0: &Operator, times: &[f64]) -> Result<Vec<Operator>> {
        times.iter().map(|&t| self.propagate(rho0, t)).collect()
    }
}

pub fn me_propagate(model: &LindbladModel, rho0: &Operator, t: f64) -> Result<Operator> {
    rho0.check_density(1.0)?;
    MePropagator::new(model).propagate(rho0, t)
}

/// Stationary state: null vector of the vectorized Liouvillian with unit trace.
pub fn me_steady_state(model: &LindbladModel) -> Result<Operator> {
    let n = model.dim().get();
    let mut lmat = model.vectorized_liouvillian();
    let m = n * n;
    for col in 0..m {
        lmat[(0, col)] = Complex64::new(0.0, 0.0);
    }
    for k in 0..n {
        lmat[(0, k * n + k)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(m);
    rhs[0] = Complex64::new(1.0, 0.0);
    let sol = lmat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("Liouvillian has no unique steady state".into()))?;
    Ok(unvec(n, &sol).hermitian_part())
}

/// Named model presets usable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelPreset {
    Tla,
    DrivenTla,
}
