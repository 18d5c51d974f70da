use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("code distance must be an odd integer >= 3, got {0}")]
    InvalidDistance(usize),

    #[error("number of cycles must be >= 1, got {0}")]
    InvalidCycles(usize),

    #[error("probability {value} out of range [0, {max}] for {op}")]
    InvalidProbability {
        op: &'static str,
        value: f64,
        max: f64,
    },

    #[error("noise instruction {0} has no bound probability")]
    UnboundNoise(usize),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid range [{lo}, {hi}]: endpoints must be non-negative with lo <= hi")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("circuit dump parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("error mechanism flipping detectors {0:?} cannot be decomposed into graphlike parts")]
    Decomposition(Vec<u32>),

    #[error("exhaustive decoding supports at most {max} mechanisms, graph has {got}")]
    TooManyMechanisms { max: usize, got: usize },

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("trace too short: need at least {min} samples, got {got}")]
    TraceTooShort { min: usize, got: usize },

    #[error("logical error rate unresolvable: {errors} logical errors in {shots} shots; increase shots to at least {suggested}")]
    Unresolvable {
        errors: u64,
        shots: u64,
        suggested: u64,
    },

    #[error("could not spoil policy to the 50% logical error level: reached {reached:.4} at scale {scale}")]
    SpoilFailed { reached: f64, scale: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
