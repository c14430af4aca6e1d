use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{DetectorSpec, RunSetup};
use super::rng::seed_stream;
use crate::apd::{ApdFilter, ApdForm, ApdSupersystem};
use crate::error::Result;
use crate::ideal::{sample_flag, HomodyneUnraveling, JumpUnraveling, StepSize};
use crate::qops::{Hermitian, LindbladModel, Operator};
use crate::receiver::{
    marginal_state, mean_voltage, NoiseOnlyPipeline, ReceiverFilter, ReceiverGenerator, ReceiverParams,
    ReceiverSupersystem, VoltageGrid,
};

/// Step maps shared by every trajectory of a run.
#[derive(Debug, Clone)]
enum Maps {
    Jump(JumpUnraveling),
    Homodyne(HomodyneUnraveling),
    Apd(ApdFilter),
    Receiver { filter: ReceiverFilter, grid: VoltageGrid },
    NoiseOnly(ReceiverParams),
}

/// Everything needed to start trajectories of one configured run.
#[derive(Debug, Clone)]
pub struct Engine {
    model: LindbladModel,
    initial: Operator,
    dt: StepSize,
    steps: usize,
    snapshot_every: usize,
    master_seed: u64,
    maps: Maps,
}

impl Engine {
    pub fn new(setup: &RunSetup) -> Result<Self> {
        let model = setup.model.clone();
        let dt = StepSize::new(setup.config.run.dt)?;
        let maps = match &setup.config.detector {
            DetectorSpec::IdealJump { efficiency } => Maps::Jump(JumpUnraveling::new(&model, *efficiency, dt)?),
            DetectorSpec::IdealHomodyne { efficiency, scheme } => {
                Maps::Homodyne(HomodyneUnraveling::new(&model, *efficiency, dt, *scheme)?)
            }
            DetectorSpec::Receiver(spec) => {
                Maps::Receiver { filter: ReceiverFilter::new(&model, spec.params()?, dt)?, grid: spec.grid()? }
            }
            DetectorSpec::ReceiverNoiseOnly(p) => {
                p.validate()?;
                Maps::NoiseOnly(*p)
            }
            other => {
                let (p, variant) = other.apd_variant().expect("remaining detectors are APDs");
                Maps::Apd(ApdFilter::new(&model, p, dt, variant, ApdForm::Normalized)?)
            }
        };
        Ok(Self {
            model,
            initial: setup.initial.clone(),
            dt,
            steps: setup.steps,
            snapshot_every: setup.snapshot_every,
            master_seed: setup.config.run.master_seed,
            maps,
        })
    }

    pub fn model(&self) -> &LindbladModel {
        &self.model
    }

    pub fn initial(&self) -> &Operator {
        &self.initial
    }

    pub fn dt(&self) -> f64 {
        self.dt.get()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step indices at which snapshots are taken: 0, every, 2·every, … and the last step.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..=self.steps).step_by(self.snapshot_every).collect();
        if *v.last().expect("step 0 is always present") != self.steps {
            v.push(self.steps);
        }
        v
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshot_steps().iter().map(|&k| k as f64 * self.dt.get()).collect()
    }

    /// Starts a trajectory. `sampled` trajectories simulate their own
    /// measurement record (drawing any hidden initial data from `rng`).
    pub fn start(&self, sampled: bool, rng: &mut ChaCha8Rng) -> Result<Trajectory<'_>> {
        let rho = Hermitian::from_operator(&self.initial);
        let state = match &self.maps {
            Maps::Jump(_) | Maps::Homodyne(_) => State::Ideal { scratch: rho.clone(), rho },
            Maps::Apd(f) => State::Apd(f.initial_state(&self.initial)?),
            Maps::Receiver { filter, grid } => {
                let p = *filter.params();
                let generator = if sampled {
                    Some(ReceiverGenerator::new(&self.model, p, self.dt, &self.initial, rng)?)
                } else {
                    None
                };
                State::Receiver {
                    grid: ReceiverSupersystem::stationary(*grid, &self.initial, p.noise_power)?,
                    generator,
                }
            }
            Maps::NoiseOnly(p) => State::NoiseOnly(NoiseOnlyPipeline::new(&self.model, *p, self.dt, &self.initial)?),
        };
        Ok(Trajectory { engine: self, state, observable: 0.0 })
    }

    /// Runs sampled trajectory `index` and returns its snapshots as flat rows
    /// of `n² + 2` numbers: state coordinates, purity, observable.
    pub fn sampled_snapshots(&self, index: usize) -> Result<Vec<f64>> {
        let mut rng = seed_stream(self.master_seed, index as u64);
        let mut tr = self.start(true, &mut rng)?;
        let marks = self.snapshot_steps();
        let mut out = Vec::with_capacity(marks.len() * (self.model.dim().get().pow(2) + 2));
        let mut k = 0;
        for &mark in &marks {
            while k < mark {
                tr.advance_sampled(&mut rng)?;
                k += 1;
            }
            let h = tr.state_coords();
            out.extend_from_slice(h.coords());
            out.push(h.purity());
            out.push(tr.observable());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
enum State {
    Ideal { rho: Hermitian, scratch: Hermitian },
    Apd(ApdSupersystem),
    Receiver { grid: ReceiverSupersystem, generator: Option<ReceiverGenerator> },
    NoiseOnly(NoiseOnlyPipeline),
}

/// One conditioned trajectory. Record values per step are the count flag
/// (0 or 1) for counting detectors, the current J for homodyne detection and
/// the output voltage for photoreceivers.
#[derive(Debug, Clone)]
pub struct Trajectory<'a> {
    engine: &'a Engine,
    state: State,
    observable: f64,
}

impl Trajectory<'_> {
    /// Name of the running observable: cumulative counts, integrated current
    /// or the conditioned mean voltage.
    pub fn observable_name(&self) -> &'static str {
        match self.state {
            State::Ideal { .. } if matches!(self.engine.maps, Maps::Jump(_)) => "counts",
            State::Apd(_) => "counts",
            State::Receiver { .. } => "mean_voltage",
            _ => "charge",
        }
    }

    pub fn observable(&self) -> f64 {
        match &self.state {
            State::Receiver { grid, .. } => mean_voltage(grid),
            _ => self.observable,
        }
    }

    /// Simulates one step of detector output and conditions on it.
    pub fn advance_sampled(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let dt = self.engine.dt.get();
        let value = match (&self.engine.maps, &mut self.state) {
            (Maps::Jump(u), State::Ideal { rho, scratch }) => {
                let flag = sample_flag(u.expected_dn(rho)?, rng);
                u.step(rho, flag, scratch)?;
                f64::from(u8::from(flag))
            }
            (Maps::Homodyne(u), State::Ideal { rho, scratch }) => {
                let j = u.current(rho, dt.sqrt() * rng.sample::<f64, _>(StandardNormal));
                u.step(rho, j, scratch)?;
                j
            }
            (Maps::Apd(f), State::Apd(s)) => f64::from(u8::from(f.sample_step(s, rng)?)),
            (Maps::Receiver { filter, .. }, State::Receiver { grid, generator }) => {
                let generator = generator.as_mut().expect("sampled receiver trajectories carry a generator");
                let record = generator.step(rng)?.record;
                filter.step(grid, record)?;
                record
            }
            (Maps::NoiseOnly(_), State::NoiseOnly(p)) => p.step(rng)?,
            _ => unreachable!("state matches its maps"),
        };
        self.account(value);
        Ok(value)
    }

    /// Conditions on one recorded step.
    pub fn advance_recorded(&mut self, value: f64) -> Result<()> {
        match (&self.engine.maps, &mut self.state) {
            (Maps::Jump(u), State::Ideal { rho, scratch }) => u.step(rho, flag(value)?, scratch)?,
            (Maps::Homodyne(u), State::Ideal { rho, scratch }) => u.step(rho, value, scratch)?,
            (Maps::Apd(f), State::Apd(s)) => f.step(s, flag(value)?)?,
            (Maps::Receiver { filter, .. }, State::Receiver { grid, .. }) => {
                filter.step(grid, value)?;
            }
            (Maps::NoiseOnly(_), State::NoiseOnly(p)) => p.observe(value)?,
            _ => unreachable!("state matches its maps"),
        }
        self.account(value);
        Ok(())
    }

    fn account(&mut self, value: f64) {
        self.observable = match &self.state {
            State::Receiver { .. } => return,
            State::Apd(_) => self.observable + value,
            State::Ideal { .. } if matches!(self.engine.maps, Maps::Jump(_)) => self.observable + value,
            _ => self.observable + value * self.engine.dt.get(),
        };
    }

    /// Conditioned system state.
    pub fn state(&self) -> Operator {
        match &self.state {
            State::Ideal { rho, .. } => rho.to_operator(),
            State::Apd(s) => s.conditioned_state(),
            State::Receiver { grid, .. } => marginal_state(grid),
            State::NoiseOnly(p) => p.estimate(),
        }
    }

    pub fn state_coords(&self) -> Hermitian {
        match &self.state {
            State::Ideal { rho, .. } => rho.clone(),
            State::NoiseOnly(p) => p.estimate_coords().clone(),
            _ => Hermitian::from_operator(&self.state()),
        }
    }

    /// Checks the conditioned state is a density operator, plus the
    /// detector-specific invariants of APD and photoreceiver supersystems.
    pub fn check_invariants(&self) -> Result<()> {
        match &self.state {
            State::Apd(s) => s.check_invariants()?,
            State::Receiver { grid, .. } => grid.check_invariants()?,
            _ => {}
        }
        self.state().check_density(1.0)
    }

    /// The voltage grid of a photoreceiver filter.
    pub fn receiver_grid(&self) -> Option<&ReceiverSupersystem> {
        match &self.state {
            State::Receiver { grid, .. } => Some(grid),
            _ => None,
        }
    }
}

fn flag(value: f64) -> Result<bool> {
    if value == 0.0 {
        Ok(false)
    } else if value == 1.0 {
        Ok(true)
    } else {
        Err(crate::error::Error::Parse(format!("count record value {value} is not 0 or 1")))
    }
}
