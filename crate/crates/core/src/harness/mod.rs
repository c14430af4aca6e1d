//! Configured runs: TOML configs, reproducible per-trajectory random
//! streams, generate/filter/ensemble drivers and their CSV outputs.

mod compare;
mod config;
mod ensemble;
mod io;
mod rng;
mod run;
mod stats;
mod trajectory;

pub use compare::{compare_trajectories, Comparison};
pub use config::{
    DetectorSpec, InitialState, MatrixLiteral, Mode, ModelSpec, NamedState, OutputSpec, ReceiverSpec, RunConfig,
    RunSection, RunSetup, OUT_DIR_ENV,
};
#[cfg(feature = "parallel")]
pub use ensemble::map_trajectories_parallel;
pub use ensemble::{map_trajectories, map_trajectories_sequential};
pub use io::{read_hash, read_record, state_columns, write_record, TrajectoryTable, HASH_PREFIX};
pub use rng::seed_stream;
pub use run::{run, run_file, RunReport};
pub use stats::SummaryStats;
pub use trajectory::{Engine, Trajectory};
