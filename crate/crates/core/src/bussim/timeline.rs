use std::ops::Range;

use crate::canproto::BitSequence;

/// Who drives the bus during part of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transmitter {
    Ecu(usize),
    AddedModule,
}

impl std::fmt::Display for Transmitter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Transmitter::Ecu(k) => write!(f, "ecu{k}"),
            Transmitter::AddedModule => f.write_str("added"),
        }
    }
}

/// A contiguous range of a frame's bits driven by one transmitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxSegment {
    pub by: Transmitter,
    /// Bit offsets within the frame.
    pub bits: Range<usize>,
}

/// A frame as it appeared on the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineFrame {
    /// SOF position in bit times since t = 0.
    pub start_bit: u64,
    /// On-wire bits (stuffed image plus trailer).
    pub bits: BitSequence,
    /// Non-overlapping, ordered, covering `0..bits.len()`.
    pub segments: Vec<TxSegment>,
}

impl TimelineFrame {
    pub fn single(start_bit: u64, bits: BitSequence, by: Transmitter) -> Self {
        let len = bits.len();
        Self {
            start_bit,
            bits,
            segments: vec![TxSegment { by, bits: 0..len }],
        }
    }

    pub fn end_bit(&self) -> u64 {
        self.start_bit + self.bits.len() as u64
    }

    pub fn transmitted_by(&self, t: Transmitter) -> bool {
        self.segments.iter().any(|s| s.by == t)
    }
}

/// Post-arbitration bus activity.
#[derive(Debug, Clone, PartialEq)]
pub struct BusTimeline {
    pub bitrate: u32,
    /// Ordered by start, non-overlapping.
    pub frames: Vec<TimelineFrame>,
}

impl BusTimeline {
    /// First sample at or after bit boundary `tick`.
    pub(crate) fn tick_to_sample(tick: u64, samples_per_bit: f64) -> usize {
        (tick as f64 * samples_per_bit - 1e-9).ceil() as usize
    }
}
