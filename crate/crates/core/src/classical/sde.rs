use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Field = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// dX = a(X)dt + √D dW + e dN with E[dN] = g(X)dt.
#[derive(Clone)]
pub struct SdeModel {
    drift: Field,
    diffusion: f64,
    jump: f64,
    rate: Field,
}

impl fmt::Debug for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeModel").field("diffusion", &self.diffusion).field("jump", &self.jump).finish_non_exhaustive()
    }
}

impl SdeModel {
    pub fn new(
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion: f64,
        jump: f64,
        rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::InvalidParameter(format!("diffusion {diffusion} must be ≥ 0")));
        }
        if !jump.is_finite() {
            return Err(Error::InvalidParameter("jump amplitude must be finite".into()));
        }
        Ok(Self { drift: Arc::new(drift), diffusion, jump, rate: Arc::new(rate) })
    }

    /// a(x) = −kx, no jumps.
    pub fn ornstein_uhlenbeck(k: f64, diffusion: f64) -> Result<Self> {
        Self::new(move |x| -k * x, diffusion, 0.0, |_| 0.0)
    }

    pub fn with_jumps(self, jump: f64, rate: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !jump.is_finite() {
            return Err(Error::InvalidParameter("jump amplitude must be finite".into()));
        }
        Ok(Self { jump, rate: Arc::new(rate), ..self })
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn rate(&self, x: f64) -> f64 {
        (self.rate)(x)
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn jump(&self) -> f64 {
        self.jump
    }
}

/// Itô step x + a(x)dt + √D dW + e dN.
pub fn langevin_step(m: &SdeModel, x: f64, dw: f64, dn: bool, dt: f64) -> f64 {
    let jump = if dn { m.jump } else { 0.0 };
    x + m.drift(x) * dt + m.diffusion.sqrt() * dw + jump
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn pure_jump() {
        let m = SdeModel::new(|_| 0.0, 0.0, 1.0, |_| 1.0).unwrap();
        assert_eq!(langevin_step(&m, 0.0, 0.0, true, 0.1), 1.0);
    }

    #[test]
    fn deterministic_euler() {
        let m = SdeModel::ornstein_uhlenbeck(2.0, 1.0).unwrap();
        assert_eq!(langevin_step(&m, 1.5, 0.0, false, 0.01), 1.5 - 2.0 * 1.5 * 0.01);
    }

    #[test]
    fn negative_diffusion_rejected() {
        assert!(SdeModel::ornstein_uhlenbeck(1.0, -1.0).is_err());
    }

    #[test]
    fn ou_stationary_variance() {
        let (k, d, dt) = (1.0, 0.5, 1e-3f64);
        let m = SdeModel::ornstein_uhlenbeck(k, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 4000;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let mut x = 0.0;
            for _ in 0..5000 {
                let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                x = langevin_step(&m, x, dw, false, dt);
            }
            sum2 += x * x;
        }
        let target = d / (2.0 * k);
        let var = sum2 / n as f64;
        // sample variance of a Gaussian has standard error σ²√(2/n)
        assert!((var - target).abs() < 3.0 * target * (2.0 / n as f64).sqrt());
    }
}
