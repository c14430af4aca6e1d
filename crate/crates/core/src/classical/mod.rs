//! Classical stochastic processes on a line: Langevin sampling, grid
//! evolution of the probability density, and Bayesian conditioning.

mod grid;
mod kalman;
mod sde;

pub use grid::{bayes_update, dcke_step, sdcke_step, GridDistribution};
pub use kalman::{kalman_bucy_oracle, KalmanBucy};
pub use sde::{langevin_step, SdeModel};
