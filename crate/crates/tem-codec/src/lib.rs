//! Time-encoding codec for bandlimited signals.
//!
//! Four integrate-and-fire sampler variants share one pipeline: the classic
//! fixed-bias machine, an adaptive-bias machine driven by an online max
//! amplitude estimator, and compressed forms of both that partition the
//! interval dynamic range into segments and emit the segment index only when
//! it changes. Interval quantization runs through a behavioral two-step
//! pulse-shrinking TDC whose stage widths follow the segment plan. Encoded
//! events serialize to a bit-exact stream; a mirroring decoder replays the
//! encoder state and reconstructs the signal from its firing times with a
//! sinc-kernel least-squares solve.

pub mod audio;
pub mod bench;
pub mod bitstream;
pub mod codec;
pub mod compress;
pub mod decode;
pub mod error;
pub mod params;
pub mod signal;
pub mod stats;
pub mod tem;

pub use error::{CodecError, Result};
pub use params::{CodecParams, Machine, TdcMode};
pub use signal::{mse_db, synth_sinc_signal, BandlimitedSignal, SampledTrace, TraceOrigin};
pub use bitstream::{BitAccount, SampleRecord, SourceTag, StreamHeader};
pub use codec::{encode_stream, EncodeResult};
pub use decode::{mirror_decode, parse_stream, reconstruct, DecodedSequence, ReconstructionConfig};
pub use tem::{encode_adaptive, encode_fixed, quantize_bias, FiringEvent, FiringSequence, MapState};
