use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::{noise_only_efficiency, ReceiverParams};
use crate::error::{Error, Result};
use crate::ideal::{DiffusiveScheme, HomodyneUnraveling, StepSize};
use crate::qops::{Hermitian, LindbladModel, Operator};

/// One step of simulated photoreceiver output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSample {
    /// Measured output 𝒱 = v + Johnson noise.
    pub record: f64,
    /// Hidden amplifier voltage v at the end of the step.
    pub voltage: f64,
    /// Hidden photocurrent J driving the amplifier.
    pub current: f64,
    /// Actual Johnson-noise increment dW_J.
    pub johnson: f64,
}

/// Simulates the hidden truth behind a photoreceiver record: an ideal
/// diffusive trajectory at efficiency η drives the amplifier
///
/// ```text
/// dv = −γ v dt − √(γη/N) ⟨c_Φ + c_Φ†⟩ dt − √(γ/N) dW
/// ```
///
/// (dW the homodyne noise of the trajectory), and the record is
/// 𝒱 = v + dW_J / (√γ dt).
#[derive(Debug, Clone)]
pub struct ReceiverGenerator {
    unravel: HomodyneUnraveling,
    params: ReceiverParams,
    dt: f64,
    rho: Hermitian,
    scratch: Hermitian,
    voltage: f64,
}

impl ReceiverGenerator {
    /// Starts from `rho` with v drawn from the vacuum stationary distribution.
    pub fn new(
        model: &LindbladModel,
        params: ReceiverParams,
        dt: StepSize,
        rho: &Operator,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let v0 = params.stationary_variance().sqrt() * rng.sample::<f64, _>(StandardNormal);
        Self::with_voltage(model, params, dt, rho, v0)
    }

    pub fn with_voltage(
        model: &LindbladModel,
        params: ReceiverParams,
        dt: StepSize,
        rho: &Operator,
        voltage: f64,
    ) -> Result<Self> {
        params.validate()?;
        if model.lo_amplitude().norm() > 0.0 {
            return Err(Error::InvalidParameter(
                "the photoreceiver supplies its own local oscillator; use a model with mu = 0".into(),
            ));
        }
        rho.check_density(1.0)?;
        model.hamiltonian().ensure_same_dim(rho)?;
        let phased = model.clone().with_phase(params.phase)?;
        let unravel = HomodyneUnraveling::new(&phased, params.efficiency, dt, DiffusiveScheme::Kraus)?;
        Ok(Self {
            unravel,
            params,
            dt: dt.get(),
            rho: Hermitian::from_operator(rho),
            scratch: Hermitian::zeros(model.dim()),
            voltage,
        })
    }

    /// Hidden system state (the ideal-detector conditioned state).
    pub fn state(&self) -> Operator {
        self.rho.to_operator()
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn step(&mut self, rng: &mut impl Rng) -> Result<ReceiverSample> {
        let sdt = self.dt.sqrt();
        let dw = sdt * rng.sample::<f64, _>(StandardNormal);
        let johnson = sdt * rng.sample::<f64, _>(StandardNormal);
        self.step_with(dw, johnson)
    }

    /// Step driven by explicit homodyne (`dw`) and Johnson (`johnson`) increments.
    pub fn step_with(&mut self, dw: f64, johnson: f64) -> Result<ReceiverSample> {
        let p = &self.params;
        let (gamma, n) = (p.filter_rate, p.noise_power);
        let quadrature = self.unravel.quadrature(&self.rho);
        let current = self.unravel.current(&self.rho, dw);
        self.voltage += -gamma * self.voltage * self.dt
            - (gamma * p.efficiency / n).sqrt() * quadrature * self.dt
            - (gamma / n).sqrt() * dw;
        self.unravel.step(&mut self.rho, current, &mut self.scratch)?;
        let record = self.voltage + johnson / (gamma.sqrt() * self.dt);
        Ok(ReceiverSample { record, voltage: self.voltage, current, johnson })
    }
}

/// Current seen through an unfiltered amplifier (C = 0), rescaled so that it
/// is an ideal homodyne current at efficiency η/(1+N):
/// J′ = (J + √(Nη) dW_J/dt) / (1+N).
pub fn noise_only_current(current: f64, johnson: f64, efficiency: f64, noise_power: f64, dt: f64) -> f64 {
    (current + (noise_power * efficiency).sqrt() * johnson / dt) / (1.0 + noise_power)
}

/// Hidden ideal trajectory at efficiency η plus an observer that only sees
/// the current through an unfiltered, noisy amplifier.
#[derive(Debug, Clone)]
pub struct NoiseOnlyPipeline {
    hidden: HomodyneUnraveling,
    observer: HomodyneUnraveling,
    params: ReceiverParams,
    dt: f64,
    truth: Hermitian,
    estimate: Hermitian,
    scratch: Hermitian,
}

impl NoiseOnlyPipeline {
    pub fn new(model: &LindbladModel, params: ReceiverParams, dt: StepSize, rho: &Operator) -> Result<Self> {
        params.validate()?;
        rho.check_density(1.0)?;
        let phased = model.clone().with_phase(params.phase)?;
        let reduced = noise_only_efficiency(params.efficiency, params.noise_power)?;
        Ok(Self {
            hidden: HomodyneUnraveling::new(&phased, params.efficiency, dt, DiffusiveScheme::Kraus)?,
            observer: HomodyneUnraveling::new(&phased, reduced, dt, DiffusiveScheme::Kraus)?,
            params,
            dt: dt.get(),
            truth: Hermitian::from_operator(rho),
            estimate: Hermitian::from_operator(rho),
            scratch: Hermitian::zeros(model.dim()),
        })
    }

    /// Observer's conditioned state.
    pub fn estimate(&self) -> Operator {
        self.estimate.to_operator()
    }

    pub fn estimate_purity(&self) -> f64 {
        self.estimate.purity()
    }

    pub fn truth(&self) -> Operator {
        self.truth.to_operator()
    }

    /// Advances both states; returns the observed (rescaled) current.
    pub fn step(&mut self, rng: &mut impl Rng) -> Result<f64> {
        let sdt = self.dt.sqrt();
        let dw = sdt * rng.sample::<f64, _>(StandardNormal);
        let johnson = sdt * rng.sample::<f64, _>(StandardNormal);
        let j = self.hidden.current(&self.truth, dw);
        self.hidden.step(&mut self.truth, j, &mut self.scratch)?;
        let observed = noise_only_current(j, johnson, self.params.efficiency, self.params.noise_power, self.dt);
        self.observe(observed)?;
        Ok(observed)
    }

    /// Conditions the observer on a recorded current without touching the truth.
    pub fn observe(&mut self, current: f64) -> Result<()> {
        self.observer.step(&mut self.estimate, current, &mut self.scratch)
    }

    /// Observer's state in Hermitian coordinates.
    pub fn estimate_coords(&self) -> &Hermitian {
        &self.estimate
    }
}

/// Writes a voltage record as `step,record` rows.
pub fn write_voltage_record(samples: &[f64], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "record"])?;
    for (k, v) in samples.iter().enumerate() {
        w.serialize((k as u64, *v))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `step,record` CSV; steps must run 0, 1, 2, … without gaps.
pub fn read_voltage_record(input: impl Read) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let (k, v): (u64, f64) = row?;
        if k != out.len() as u64 {
            return Err(Error::Parse(format!("record step {k} out of sequence (expected {})", out.len())));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::operator::two_level::*;
    use crate::receiver::{mean_voltage, ReceiverFilter, ReceiverSupersystem, VoltageGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn vacuum_voltage_has_stationary_variance() {
        let m = LindbladModel::tla(1.0);
        let p = ReceiverParams::new(0.8, 5.0, 0.2, 0.0).unwrap();
        let dt = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = ReceiverGenerator::new(&m, p, StepSize::new(dt).unwrap(), &ground(), &mut rng).unwrap();
        let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
        for k in 0..400_000 {
            let v = g.step(&mut rng).unwrap().voltage;
            if k % 50 == 0 {
                s1 += v;
                s2 += v * v;
                n += 1.0;
            }
        }
        let var = s2 / n - (s1 / n).powi(2);
        // samples are 0.25 correlation times apart
        assert!((var / p.stationary_variance() - 1.0).abs() < 0.08, "variance {var}");
    }

    #[test]
    fn innovation_relation_to_actual_johnson_noise() {
        // √γ d𝒲_J = √γ dW_J + γ dt (v − ⟨v⟩) in generate mode
        let m = LindbladModel::driven_tla(1.0, 1.0);
        let p = ReceiverParams::new(0.8, 20.0, 0.1, 0.0).unwrap();
        let grid = VoltageGrid::with_cells(128, p.noise_power).unwrap();
        let dt = grid.default_dt(p.filter_rate, p.noise_power);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = ReceiverGenerator::new(&m, p, StepSize::new(dt).unwrap(), &ground(), &mut rng).unwrap();
        let f = ReceiverFilter::new(&m, p, StepSize::new(dt).unwrap()).unwrap();
        let mut s = ReceiverSupersystem::stationary(grid, &ground(), p.noise_power).unwrap();
        for _ in 0..200 {
            let sample = g.step(&mut rng).unwrap();
            let mut prior = s.clone();
            f.predict(&mut prior).unwrap();
            let predicted = mean_voltage(&prior);
            let innovation = f.step(&mut s, sample.record).unwrap();
            let gamma = p.filter_rate;
            let expect = sample.johnson + gamma.sqrt() * dt * (sample.voltage - predicted);
            assert!((innovation - expect).abs() < 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn noise_only_current_statistics() {
        let (eta, n, dt) = (0.8f64, 0.25, 1e-3f64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..reps {
            let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let dj = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            let j = eta * 0.5 + eta.sqrt() * dw / dt;
            let x = noise_only_current(j, dj, eta, n, dt) * dt;
            s1 += x;
            s2 += x * x;
        }
        let eta2 = noise_only_efficiency(eta, n).unwrap();
        let mean = s1 / reps as f64;
        let var = s2 / reps as f64 - mean * mean;
        assert!((mean - eta2 * 0.5 * dt).abs() < 4.0 * (eta2 * dt / reps as f64).sqrt());
        assert!((var / (eta2 * dt) - 1.0).abs() < 0.02);
    }

    #[test]
    fn record_round_trip() {
        let samples = vec![0.5, -1.25, 3.0];
        let mut buf = Vec::new();
        write_voltage_record(&samples, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("step,record\n0,0.5"));
        assert_eq!(read_voltage_record(&buf[..]).unwrap(), samples);
        let gap = "step,record\n0,1.0\n2,1.0\n";
        assert!(read_voltage_record(gap.as_bytes()).is_err());
    }
}
