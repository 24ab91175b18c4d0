use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon cutoff {0} is too small: the cascade populates |g,2>, so at least 2 photons are required")]
    CutoffTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("adaptive step size underflow at t = {time} (step {step:e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("missing element label {0}")]
    MissingElement(String),

    #[error("time ordering violated: {0}")]
    TimeOrdering(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("degenerate signal: max + min = {0} is not positive")]
    DegenerateSignal(f64),

    #[error("plateau not detected: {0}")]
    PlateauNotDetected(String),

    #[error("numerical invariant violated: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
