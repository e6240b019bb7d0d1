use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpcError {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("regularizer must be positive, got {0}")]
    InvalidLambda(f64),

    #[error("chunk is empty")]
    EmptyChunk,

    #[error("chunk has {len} steps, fewer than the execution floor {k}")]
    ChunkTooShort { len: usize, k: usize },

    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {n} outside the exact 64-bit range (max {max})")]
    OutOfRange { n: u32, max: u32 },

    #[error("horizon {k} outside supported range 1..={max}")]
    HorizonOutOfRange { k: usize, max: usize },

    #[error("degenerate instance: {0}")]
    Degenerate(&'static str),

    #[error("frames out of order: tick {now} does not follow {prev}")]
    TickOrder { prev: u64, now: u64 },

    #[error("at least {needed} samples required, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, PpcError>;
