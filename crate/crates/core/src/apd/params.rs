use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApdParams {
    /// Quantum efficiency η.
    pub efficiency: f64,
    /// Dark-count rate.
    pub dark_rate: f64,
    /// Rate at which a created pair becomes a detected avalanche.
    pub response_rate: f64,
    /// Dead time after each avalanche.
    pub dead_time: f64,
}

impl ApdParams {
    pub fn new(efficiency: f64, dark_rate: f64, response_rate: f64, dead_time: f64) -> Result<Self> {
        let p = Self { efficiency, dark_rate, response_rate, dead_time };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(Error::InvalidParameter(format!("dark-count rate {} must be ≥ 0", self.dark_rate)));
        }
        if !(self.response_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("response rate {} must be positive", self.response_rate)));
        }
        if !(self.dead_time >= 0.0) || !self.dead_time.is_finite() {
            return Err(Error::InvalidParameter(format!("dead time {} must be ≥ 0", self.dead_time)));
        }
        Ok(())
    }

    /// Dead time as a whole number of steps of length `dt`.
    pub fn dead_steps(&self, dt: f64) -> Result<u64> {
        let n = self.dead_time / dt;
        let r = n.round();
        if (n - r).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "dead time {} is not a multiple of dt = {dt}",
                self.dead_time
            )));
        }
        Ok(r as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dead_time_snapping() {
        let p = ApdParams::new(0.8, 0.1, 10.0, 0.5).unwrap();
        assert_eq!(p.dead_steps(1e-3).unwrap(), 500);
        assert!(p.dead_steps(3e-3).is_err());
        assert_eq!(ApdParams::new(0.8, 0.1, 10.0, 0.0).unwrap().dead_steps(1e-3).unwrap(), 0);
    }

    #[test]
    fn invalid_values() {
        assert!(ApdParams::new(1.2, 0.0, 1.0, 0.0).is_err());
        assert!(ApdParams::new(0.5, -1.0, 1.0, 0.0).is_err());
        assert!(ApdParams::new(0.5, 0.0, 0.0, 0.0).is_err());
        assert!(ApdParams::new(0.5, 0.0, 1.0, -0.1).is_err());
    }
}
