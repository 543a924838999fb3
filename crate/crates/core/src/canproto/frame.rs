use std::fmt;

use super::bits::{crc15_of, push_msb_first, stuff_bits, BitRole, BitSequence};
use super::ProtoError;

pub const MAX_STANDARD_ID: u32 = (1 << 11) - 1;
pub const MAX_EXTENDED_ID: u32 = (1 << 29) - 1;
pub const MAX_DLC: usize = 8;

/// Recessive bits after the CRC field: CRC delimiter, ACK delimiter and EOF,
/// plus the dominant ACK slot, in wire order.
pub(crate) const TRAILER: [bool; 10] = [true, false, true, true, true, true, true, true, true, true];

/// Interframe space in bit times.
pub const INTERFRAME_BITS: u64 = 3;

/// Identifier width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameFormat {
    /// 11-bit identifier.
    Standard,
    /// 29-bit identifier.
    Extended,
}

impl FrameFormat {
    pub fn max_id(self) -> u32 {
        match self {
            FrameFormat::Standard => MAX_STANDARD_ID,
            FrameFormat::Extended => MAX_EXTENDED_ID,
        }
    }
}

impl fmt::Display for FrameFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameFormat::Standard => "standard",
            FrameFormat::Extended => "extended",
        })
    }
}

/// A classical CAN data frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanFrame {
    id: u32,
    format: FrameFormat,
    payload: Vec<u8>,
}

impl CanFrame {
    pub fn new(id: u32, format: FrameFormat, payload: &[u8]) -> Result<Self, ProtoError> {
        if id > format.max_id() {
            return Err(ProtoError::InvalidId { id, format });
        }
        if payload.len() > MAX_DLC {
            return Err(ProtoError::InvalidDlc(payload.len()));
        }
        Ok(Self {
            id,
            format,
            payload: payload.to_vec(),
        })
    }

    pub fn standard(id: u32, payload: &[u8]) -> Result<Self, ProtoError> {
        Self::new(id, FrameFormat::Standard, payload)
    }

    pub fn extended(id: u32, payload: &[u8]) -> Result<Self, ProtoError> {
        Self::new(id, FrameFormat::Extended, payload)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn format(&self) -> FrameFormat {
        self.format
    }

    pub fn dlc(&self) -> usize {
        self.payload.len()
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Arbitration field as it appears on the wire (without SOF).
    ///
    /// Comparing these lexicographically (dominant `false` first) gives the
    /// bus priority order, including standard-vs-extended contention.
    pub fn arbitration_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(32);
        match self.format {
            FrameFormat::Standard => {
                push_msb_first(&mut bits, self.id, 11);
                bits.push(false); // RTR
                bits.push(false); // IDE
            }
            FrameFormat::Extended => {
                push_msb_first(&mut bits, self.id >> 18, 11);
                bits.push(true); // SRR
                bits.push(true); // IDE
                push_msb_first(&mut bits, self.id & 0x3FFFF, 18);
                bits.push(false); // RTR
            }
        }
        bits
    }

    /// SOF through the end of the data field, unstuffed: the CRC input.
    pub fn crc_input_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(128);
        bits.push(false); // SOF
        bits.extend(self.arbitration_bits());
        match self.format {
            FrameFormat::Standard => bits.push(false),            // r0
            FrameFormat::Extended => bits.extend([false, false]), // r1, r0
        }
        push_msb_first(&mut bits, self.dlc() as u32, 4);
        for &byte in &self.payload {
            push_msb_first(&mut bits, byte as u32, 8);
        }
        bits
    }

    pub fn crc(&self) -> u16 {
        crc15_of(&self.crc_input_bits())
    }

    /// SOF through the CRC field, unstuffed: the region subject to stuffing.
    pub fn unstuffed_bits(&self) -> BitSequence {
        let mut bits = self.crc_input_bits();
        let crc = crc15_of(&bits);
        push_msb_first(&mut bits, crc as u32, 15);
        BitSequence::new(bits, BitRole::Unstuffed)
    }

    /// Unstuffed length of the whole frame including delimiters, ACK and EOF.
    pub fn unstuffed_len(&self) -> usize {
        self.unstuffed_bits().len() + TRAILER.len()
    }
}

/// Full on-wire bit image: stuffed SOF..CRC followed by CRC delimiter,
/// acknowledged ACK slot, ACK delimiter and EOF.
pub fn serialize_frame(frame: &CanFrame) -> BitSequence {
    let mut out = stuff_bits(&frame.unstuffed_bits());
    out.extend_from_slice(&TRAILER);
    out
}
