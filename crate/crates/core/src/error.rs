use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular evaluation: {what} (separation {distance:e})")]
    Singularity { what: &'static str, distance: f64 },

    #[error("point ({x}, {y}) is not interior to the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration halted at t = {time}: {reason}")]
    Halted { time: f64, reason: String },

    #[error("center of vorticity undefined: blob {blob} has zero total circulation")]
    UndefinedCenter { blob: usize },

    #[error("structural mismatch: {0}")]
    Structure(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
