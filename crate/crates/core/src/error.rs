use thiserror::Error;

/// Errors raised by the simulation, equalization and training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid overlap-save geometry: {0}")]
    Geometry(String),

    #[error("overlap {actual} is below the required {required} samples of equalizer memory")]
    InsufficientOverlap { required: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient bandwidth: {0}")]
    Bandwidth(String),

    #[error("per-step nonlinear phase {phase} rad exceeds the {limit} rad limit")]
    StepTooLarge { phase: f64, limit: f64 },

    #[error("non-finite gradient at layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("training diverged at epoch {epoch}: loss {loss} vs initial {initial}")]
    Diverged { epoch: usize, loss: f64, initial: f64 },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("unknown equalizer kind `{0}`")]
    UnknownEqualizer(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
