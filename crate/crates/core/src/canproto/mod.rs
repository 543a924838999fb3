//! CAN frame model, bit-level serialization and waveform decoding.
//!
//! Frames are serialized to their on-wire image (CRC-15, bit stuffing over
//! SOF..CRC, acknowledged ACK slot, EOF) and bus access between competing
//! requests is resolved by identifier priority. [`decode_transmissions`]
//! goes the other way, from a sampled differential voltage back to
//! timestamped frames.

mod address;
mod arbitration;
mod bits;
mod decode;
mod frame;

pub use address::{SaDerivation, SourceAddress, SourceAddressMap};
pub use arbitration::{arbitrate, bit_tick, ScheduledTransmission};
pub use bits::{compute_crc15, stuff_bits, unstuff_bits, BitRole, BitSequence, CRC15_POLY, STUFF_RUN};
pub use decode::{
    decode_transmissions, decode_with_threshold, DecodedTransmission, DOMINANT_THRESHOLD_V, MIN_SAMPLES_PER_BIT,
};
pub use frame::{serialize_frame, CanFrame, FrameFormat, INTERFRAME_BITS, MAX_DLC, MAX_EXTENDED_ID, MAX_STANDARD_ID};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtoError {
    #[error("identifier {id:#x} out of range for {format} frame")]
    InvalidId { id: u32, format: FrameFormat },
    #[error("data length {0} exceeds 8 bytes")]
    InvalidDlc(usize),
    #[error("six consecutive equal bits at stuffed position {position}")]
    StuffViolation { position: usize },
    #[error("invalid bit character {found:?} at {pos}")]
    BadBitChar { pos: usize, found: char },
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("sample rate {sample_rate} Hz is below 10x the bitrate {bitrate} bit/s")]
    SampleRateTooLow { sample_rate: f64, bitrate: u32 },
    #[error("two simultaneous requesters share identifier {id:#x}")]
    DuplicateId { id: u32 },
    #[error("source address {sa} already owned by ECU {owner}, cannot assign to ECU {other}")]
    ConflictingOwner { sa: u8, owner: usize, other: usize },
    #[error("source address {0} has no owning ECU")]
    UnknownSourceAddress(u8),
    #[error("identifier {id:#x} ({format}) already mapped to another source address")]
    ConflictingId { id: u32, format: FrameFormat },
}
