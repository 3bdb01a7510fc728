use thiserror::Error;

/// Errors surfaced by the codec pipeline.
#[derive(Debug, Error)]
pub enum CodecError {
    /// An argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Sampler constants are inconsistent with the signal (e.g. bias below
    /// the amplitude bound, which may stall the integrator).
    #[error("configuration error: {0}")]
    Config(String),

    /// A file could not be ingested (unreadable, wrong encoding, empty).
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A stream failed framing or checksum validation.
    #[error("corrupt stream: {0}")]
    Corrupt(String),

    /// A field value does not fit the bit width the current plan allows.
    /// This is an internal invariant violation, not a recoverable state.
    #[error("bit width overflow: value {value} does not fit in {width} bits")]
    WidthOverflow { value: u64, width: u32 },

    /// The recovery system is singular after truncation.
    #[error("reconstruction error: {0}")]
    Reconstruction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CodecError>;
