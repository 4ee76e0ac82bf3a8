use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown numerology preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid activity mask: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("active bin ({p}, {q}) has |X| below the division guard")]
    DivisionGuard { p: usize, q: usize },

    #[error("subcarrier row {row} has {active} active symbol(s); interpolation needs at least 2")]
    InterpolationRow { row: usize, active: usize },

    #[error("transform size {size} is smaller than the grid dimension {dim}")]
    TransformTooSmall { size: usize, dim: usize },

    #[error("delay of {delay} samples exceeds the buffer of {len} samples")]
    DelayOutOfRange { delay: usize, len: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("adaptation diverged at block {block}: residual power grew by {growth_db:.1} dB")]
    Diverged { block: usize, growth_db: f64 },

    #[error("linear system is numerically singular")]
    Singular,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
