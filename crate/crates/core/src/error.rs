use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Hilbert-space dimension {0} outside supported range 1..=64")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("jump into an outcome with vanishing probability (trace {trace:e})")]
    VanishingJumpProbability { trace: f64 },

    #[error("per-step jump probability {prob} exceeds 0.5; reduce dt")]
    ProbabilityOverflow { prob: f64 },

    #[error("jump amplitude {amplitude} is not an integer number of grid cells (dx = {dx})")]
    JumpNotGridAligned { amplitude: f64, dx: f64 },

    #[error("explicit scheme unstable: diffusion number {number:.4} exceeds {limit}")]
    CflViolation { number: f64, limit: f64 },

    #[error("observation has zero evidence under the prior")]
    ZeroEvidence,

    #[error("avalanche at step {step} while detector is dead until step {reset_step}")]
    AvalancheDuringDeadTime { step: u64, reset_step: u64 },

    #[error("probability weight {mass:e} in outer grid cells; enlarge the voltage grid")]
    GridMassLeak { mass: f64 },

    #[error("non-finite innovation at step {step}")]
    NonfiniteInnovation { step: u64 },

    #[error("no real effective bandwidth for noise power N = {0} (requires 0 < N < 1)")]
    NoRealSolution(f64),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for the failures raised by numerical guards inside the steppers
    /// (as opposed to bad configuration or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::VanishingJumpProbability { .. }
                | Error::ProbabilityOverflow { .. }
                | Error::CflViolation { .. }
                | Error::ZeroEvidence
                | Error::AvalancheDuringDeadTime { .. }
                | Error::GridMassLeak { .. }
                | Error::NonfiniteInnovation { .. }
                | Error::NoRealSolution(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
