use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverParams {
    /// Quantum efficiency η of the photodiode.
    pub efficiency: f64,
    /// Amplifier rate γ = 1/RC.
    pub filter_rate: f64,
    /// Johnson-noise power relative to the vacuum photocurrent noise.
    pub noise_power: f64,
    /// Local-oscillator phase Φ.
    #[serde(default)]
    pub phase: f64,
}

impl ReceiverParams {
    pub fn new(efficiency: f64, filter_rate: f64, noise_power: f64, phase: f64) -> Result<Self> {
        let p = Self { efficiency, filter_rate, noise_power, phase };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParameter(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if !(self.filter_rate > 0.0 && self.filter_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("filter rate {} must be positive", self.filter_rate)));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise power {} must be positive", self.noise_power)));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        Ok(())
    }

    /// Variance 1/(2N) of the voltage when the input is vacuum.
    pub fn stationary_variance(&self) -> f64 {
        0.5 / self.noise_power
    }
}

/// Frequency at which filtered vacuum noise falls to the Johnson floor,
/// B = γ√((1−N)/N).
pub fn effective_bandwidth(filter_rate: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0 && noise_power < 1.0) {
        return Err(Error::NoRealSolution(noise_power));
    }
    if !(filter_rate > 0.0) {
        return Err(Error::InvalidParameter(format!("filter rate {filter_rate} must be positive")));
    }
    Ok(filter_rate * ((1.0 - noise_power) / noise_power).sqrt())
}

/// Amplifier response −1/(1 + iω/γ) in dimensionless units.
pub fn filter_transfer_check(filter_rate: f64, omega: f64) -> Complex64 {
    -1.0 / Complex64::new(1.0, omega / filter_rate)
}

/// Efficiency seen through an amplifier with no filtering (C = 0):
/// the Johnson noise just dilutes the current, η/(1+N).
pub fn noise_only_efficiency(efficiency: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise power {noise_power} must be ≥ 0")));
    }
    Ok(efficiency / (1.0 + noise_power))
}

const BOLTZMANN: f64 = 1.380_649e-23;
const HBAR: f64 = 1.054_571_817e-34;
const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

/// Photoreceiver described by circuit and optical quantities in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalReceiver {
    /// Feedback resistance R (Ω).
    pub resistance: f64,
    /// Feedback capacitance C (F).
    pub capacitance: f64,
    /// Resistor temperature T (K).
    pub temperature: f64,
    /// Local-oscillator power P (W).
    pub lo_power: f64,
    /// Optical angular frequency ω₀ (rad/s).
    pub optical_frequency: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReceiverScales {
    pub filter_rate: f64,
    pub noise_power: f64,
    /// γ√((1−N)/N); absent when N ≥ 1.
    pub bandwidth: Option<f64>,
    /// Small-noise form (e/2C)√(ηP/(k_B T R ħω₀)) = γ/√N.
    pub bandwidth_small_noise: f64,
}

impl PhysicalReceiver {
    pub fn scales(&self) -> Result<ReceiverScales> {
        let fields = [
            ("resistance", self.resistance),
            ("capacitance", self.capacitance),
            ("temperature", self.temperature),
            ("lo_power", self.lo_power),
            ("optical_frequency", self.optical_frequency),
            ("efficiency", self.efficiency),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.efficiency > 1.0 {
            return Err(Error::InvalidParameter(format!("efficiency {} exceeds 1", self.efficiency)));
        }
        let filter_rate = 1.0 / (self.resistance * self.capacitance);
        let noise_power = 4.0 * BOLTZMANN * self.temperature * HBAR * self.optical_frequency
            / (self.efficiency * self.resistance * self.lo_power * ELECTRON_CHARGE.powi(2));
        let bandwidth_small_noise = ELECTRON_CHARGE / (2.0 * self.capacitance)
            * (self.efficiency * self.lo_power
                / (BOLTZMANN * self.temperature * self.resistance * HBAR * self.optical_frequency))
                .sqrt();
        Ok(ReceiverScales {
            filter_rate,
            noise_power,
            bandwidth: effective_bandwidth(filter_rate, noise_power).ok(),
            bandwidth_small_noise,
        })
    }
}
