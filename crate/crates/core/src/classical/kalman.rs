use crate::error::{Error, Result};

/// Conditional variance of dX = −kX dt + √D dW observed through
/// dY = X dt + √β dV, from the Riccati equation
/// dΣ/dt = −2kΣ + D − Σ²/β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanBucy {
    pub k: f64,
    pub diffusion: f64,
    /// β; `f64::INFINITY` means no observation.
    pub obs_noise_power: f64,
}

impl KalmanBucy {
    pub fn new(k: f64, diffusion: f64, obs_noise_power: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("drift rate {k} must be positive")));
        }
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(Error::InvalidParameter(format!("diffusion {diffusion} must be ≥ 0")));
        }
        if !(obs_noise_power > 0.0) {
            return Err(Error::InvalidParameter(format!("observation noise power {obs_noise_power} must be positive")));
        }
        Ok(Self { k, diffusion, obs_noise_power })
    }

    /// Positive root of the stationary Riccati equation.
    pub fn steady_variance(&self) -> f64 {
        let (k, d, b) = (self.k, self.diffusion, self.obs_noise_power);
        if b.is_infinite() {
            return d / (2.0 * k);
        }
        let lambda = (k * k + d / b).sqrt();
        d / (k + lambda)
    }

    /// Σ(t) from Σ(0) = `initial_variance`.
    pub fn variance(&self, initial_variance: f64, t: f64) -> f64 {
        let (k, d, b) = (self.k, self.diffusion, self.obs_noise_power);
        if b.is_infinite() {
            let s = d / (2.0 * k);
            return s + (initial_variance - s) * (-2.0 * k * t).exp();
        }
        let lambda = (k * k + d / b).sqrt();
        let upper = d / (k + lambda);
        let lower = -b * (k + lambda);
        // u = (Σ − Σ₊)/(Σ − Σ₋) decays as e^{−2λt}
        let u = (initial_variance - upper) / (initial_variance - lower) * (-2.0 * lambda * t).exp();
        (upper - u * lower) / (1.0 - u)
    }

    /// Kalman gain Σ/β.
    pub fn gain(&self, variance: f64) -> f64 {
        variance / self.obs_noise_power
    }
}

/// (gain, variance) at time `t` starting from `initial_variance`.
pub fn kalman_bucy_oracle(
    k: f64,
    diffusion: f64,
    obs_noise_power: f64,
    initial_variance: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let kb = KalmanBucy::new(k, diffusion, obs_noise_power)?;
    let v = kb.variance(initial_variance, t);
    Ok((kb.gain(v), v))
}
