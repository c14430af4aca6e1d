//! Homodyne detection through a realistic photoreceiver.
//!
//! The photocurrent is low-pass filtered by the amplifier (rate γ = 1/RC) and
//! the output voltage carries white Johnson noise of relative power N. The
//! detector state is the dimensionless amplifier voltage v, so the
//! supersystem is an operator-valued density ρ(v) held on a voltage grid.

mod filter;
mod generate;
mod grid;
mod params;
mod spectrum;

pub use filter::{receiver_skse_step, ReceiverFilter};
pub use generate::{
    noise_only_current, read_voltage_record, write_voltage_record, NoiseOnlyPipeline, ReceiverGenerator, ReceiverSample,
};
pub use grid::{marginal_state, mean_voltage, ReceiverSupersystem, VoltageGrid, BOUNDARY_MASS_LIMIT};
pub use params::{
    effective_bandwidth, filter_transfer_check, noise_only_efficiency, PhysicalReceiver, ReceiverParams, ReceiverScales,
};
pub use spectrum::{noise_floor_crossing, welch_periodogram, Spectrum};
