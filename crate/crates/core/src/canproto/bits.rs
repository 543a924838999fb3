use std::fmt;
use std::str::FromStr;

use super::ProtoError;

/// CRC-15/CAN generator polynomial `x^15+x^14+x^10+x^8+x^7+x^4+x^3+1`
/// with the leading term dropped.
pub const CRC15_POLY: u16 = 0x4599;

/// Number of equal bits after which a complement bit is inserted.
pub const STUFF_RUN: usize = 5;

/// Whether a sequence is a raw frame image or the on-wire stuffed image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitRole {
    Unstuffed,
    Stuffed,
}

/// Ordered bits as they appear on the bus. `false` is dominant (logical 0),
/// `true` is recessive (logical 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSequence {
    bits: Vec<bool>,
    role: BitRole,
}

impl BitSequence {
    pub fn new(bits: Vec<bool>, role: BitRole) -> Self {
        Self { bits, role }
    }

    pub fn unstuffed(bits: Vec<bool>) -> Self {
        Self::new(bits, BitRole::Unstuffed)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn role(&self) -> BitRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Appends the `width` low bits of `value`, most significant first.
    pub fn push_field(&mut self, value: u32, width: u32) {
        push_msb_first(&mut self.bits, value, width);
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from_slice(&mut self, bits: &[bool]) {
        self.bits.extend_from_slice(bits);
    }

    /// Longest run of equal consecutive bits.
    pub fn longest_run(&self) -> usize {
        longest_run(&self.bits)
    }
}

impl fmt::Display for BitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a string of `0`/`1` characters into an unstuffed sequence;
/// whitespace and `_` separators are ignored.
impl FromStr for BitSequence {
    type Err = ProtoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for (pos, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                ' ' | '_' => {}
                other => return Err(ProtoError::BadBitChar { pos, found: other }),
            }
        }
        Ok(Self::unstuffed(bits))
    }
}

pub(crate) fn push_msb_first(bits: &mut Vec<bool>, value: u32, width: u32) {
    for i in (0..width).rev() {
        bits.push((value >> i) & 1 == 1);
    }
}

pub(crate) fn longest_run(bits: &[bool]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut last = None;
    for &b in bits {
        if Some(b) == last {
            run += 1;
        } else {
            run = 1;
            last = Some(b);
        }
        best = best.max(run);
    }
    best
}

/// CRC-15/CAN over the unstuffed SOF..data bits, zero initial value.
///
/// Shift-register form: the feedback bit is the incoming bit XOR the
/// register's top bit.
pub fn compute_crc15(bits: &BitSequence) -> u16 {
    crc15_of(bits.bits())
}

pub(crate) fn crc15_of(bits: &[bool]) -> u16 {
    let mut crc: u16 = 0;
    for &bit in bits {
        let feedback = bit ^ ((crc >> 14) & 1 == 1);
        crc = (crc << 1) & 0x7FFF;
        if feedback {
            crc ^= CRC15_POLY;
        }
    }
    crc
}

/// Inserts a complement bit after every run of five equal bits.
/// The inserted bit starts the next run.
pub fn stuff_bits(bits: &BitSequence) -> BitSequence {
    let src = bits.bits();
    let mut out = Vec::with_capacity(src.len() + src.len() / 4 + 1);
    let mut last = None;
    let mut run = 0usize;
    for &b in src {
        out.push(b);
        if Some(b) == last {
            run += 1;
        } else {
            last = Some(b);
            run = 1;
        }
        if run == STUFF_RUN {
            out.push(!b);
            last = Some(!b);
            run = 1;
        }
    }
    BitSequence::new(out, BitRole::Stuffed)
}

/// Removes stuff bits. A sixth equal bit where a stuff bit is due is a
/// [`ProtoError::StuffViolation`].
pub fn unstuff_bits(bits: &BitSequence) -> Result<BitSequence, ProtoError> {
    let mut out = Vec::with_capacity(bits.len());
    let mut destuffer = Destuffer::default();
    for (pos, &b) in bits.bits().iter().enumerate() {
        match destuffer.feed(b) {
            Destuffed::Data(bit) => out.push(bit),
            Destuffed::Stuff => {}
            Destuffed::Violation => return Err(ProtoError::StuffViolation { position: pos }),
        }
    }
    Ok(BitSequence::unstuffed(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Destuffed {
    Data(bool),
    Stuff,
    Violation,
}

/// Incremental destuffing state, shared by [`unstuff_bits`] and the
/// waveform decoder.
#[derive(Debug, Default, Clone)]
pub(crate) struct Destuffer {
    last: Option<bool>,
    run: usize,
}

impl Destuffer {
    /// True when the next raw bit must be a stuff bit.
    pub(crate) fn stuff_due(&self) -> bool {
        self.run == STUFF_RUN
    }

    pub(crate) fn feed(&mut self, b: bool) -> Destuffed {
        if self.stuff_due() {
            if Some(b) == self.last {
                return Destuffed::Violation;
            }
            self.last = Some(b);
            self.run = 1;
            return Destuffed::Stuff;
        }
        if Some(b) == self.last {
            self.run += 1;
        } else {
            self.last = Some(b);
            self.run = 1;
        }
        Destuffed::Data(b)
    }
}
