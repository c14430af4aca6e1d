use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::operator::{two_level, TOL_POS};
use crate::qops::{Hermitian, HilbertDim, Operator};

/// Below this trace a detector state counts as unoccupied.
pub const EXCLUSIVITY_TOL: f64 = 1e-10;
const TOTAL_TRACE_TOL: f64 = 1e-8;

/// (ρ₀, ρ₁, ρ₂) plus the step at which a dead detector resets.
#[derive(Debug, Clone, PartialEq)]
pub struct ApdSupersystem {
    pub(crate) rho: [Hermitian; 3],
    pub(crate) step: u64,
    pub(crate) pending_reset: Option<u64>,
    /// Natural log of the factor removed from the linear (unnormalized) form.
    pub(crate) log_scale: f64,
    /// Set once stepped in the linear form; total trace is then free.
    pub(crate) linear: bool,
}

impl ApdSupersystem {
    /// Ready detector with the system in `rho`.
    pub fn ready(rho: &Operator) -> Result<Self> {
        rho.check_density(1.0)?;
        let dim = rho.dim();
        Ok(Self {
            rho: [Hermitian::from_operator(rho), Hermitian::zeros(dim), Hermitian::zeros(dim)],
            step: 0,
            pending_reset: None,
            log_scale: 0.0,
            linear: false,
        })
    }

    pub fn from_parts(components: [&Operator; 3], step: u64, pending_reset: Option<u64>) -> Result<Self> {
        for c in components {
            components[0].ensure_same_dim(c)?;
        }
        let s =
            Self { rho: components.map(Hermitian::from_operator), step, pending_reset, log_scale: 0.0, linear: false };
        s.check_invariants()?;
        Ok(s)
    }

    pub fn dim(&self) -> HilbertDim {
        self.rho[0].dim()
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn pending_reset(&self) -> Option<u64> {
        self.pending_reset
    }

    pub fn component(&self, i: usize) -> Operator {
        self.rho[i].to_operator()
    }

    pub fn traces(&self) -> [f64; 3] {
        [self.rho[0].trace(), self.rho[1].trace(), self.rho[2].trace()]
    }

    /// Detector-state probabilities, normalized.
    pub fn probabilities(&self) -> [f64; 3] {
        let t = self.traces();
        let total: f64 = t.iter().sum();
        t.map(|x| x / total)
    }

    /// ρ₀ + ρ₁ + ρ₂ with unit trace.
    pub fn conditioned_state(&self) -> Operator {
        let mut sum = self.rho[0].clone();
        sum.axpy(1.0, &self.rho[1]);
        sum.axpy(1.0, &self.rho[2]);
        sum.normalize();
        sum.to_operator()
    }

    pub fn is_dead(&self) -> bool {
        self.pending_reset.is_some()
    }

    /// Total trace, positivity, exclusivity and reset bookkeeping.
    pub fn check_invariants(&self) -> Result<()> {
        let t = self.traces();
        let total: f64 = t.iter().sum();
        let scale = if self.linear { total } else { 1.0 };
        if (total - scale).abs() > TOTAL_TRACE_TOL {
            return Err(Error::InvalidParameter(format!("total trace {total} differs from 1")));
        }
        for (i, r) in self.rho.iter().enumerate() {
            let min = r.to_operator().min_eigenvalue() / scale;
            if min < -TOL_POS {
                return Err(Error::InvalidParameter(format!("component {i} has negative eigenvalue {min:e}")));
            }
        }
        let (live, dead) = ((t[0] + t[1]) / total, t[2] / total);
        if live > EXCLUSIVITY_TOL && dead > EXCLUSIVITY_TOL {
            return Err(Error::InvalidParameter(format!("detector both live ({live:e}) and dead ({dead:e})")));
        }
        if self.pending_reset.is_some() != (dead > EXCLUSIVITY_TOL) {
            return Err(Error::InvalidParameter(format!(
                "reset bookkeeping {:?} inconsistent with dead weight {dead:e}",
                self.pending_reset
            )));
        }
        Ok(())
    }

    pub fn snapshot(&self, t: f64) -> ApdSnapshot {
        let tr = self.probabilities();
        let rho = self.conditioned_state();
        ApdSnapshot {
            t,
            tr0: tr[0],
            tr1: tr[1],
            tr2: tr[2],
            bloch: (rho.n() == 2).then(|| two_level::bloch_vector(&rho)),
        }
    }
}

/// JSON record of a supersystem at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApdSnapshot {
    pub t: f64,
    pub tr0: f64,
    pub tr1: f64,
    pub tr2: f64,
    /// Bloch vector of the conditioned state (two-level systems only).
    pub bloch: Option<[f64; 3]>,
}
