use super::address::{SourceAddress, SourceAddressMap};
use super::bits::{crc15_of, Destuffed, Destuffer};
use super::frame::{FrameFormat, MAX_DLC, TRAILER};
use super::ProtoError;
use crate::scalar::Scalar;
use crate::trace::SampledTrace;

/// Differential voltage above which a sample reads as dominant.
pub const DOMINANT_THRESHOLD_V: f64 = 1.0;

/// Recessive bit times required before a SOF is accepted after a damaged
/// frame (bus integration).
const IDLE_BITS_AFTER_ERROR: f64 = 11.0;

/// Minimum oversampling the decoder accepts.
pub const MIN_SAMPLES_PER_BIT: f64 = 10.0;

/// One frame recovered from the bus voltage, the `(t, S)` pair plus what the
/// decoder learnt about the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedTransmission {
    /// Time of the SOF edge, seconds.
    pub t: f64,
    /// Source address derived from the identifier; `None` when the map has no
    /// rule for it.
    pub sa: Option<SourceAddress>,
    pub id: u32,
    pub format: FrameFormat,
    pub payload: Vec<u8>,
    /// SOF through end of EOF, seconds.
    pub duration: f64,
    /// CRC matched and stuffing/form rules held.
    pub crc_ok: bool,
    /// Sample index of the SOF edge.
    pub start_sample: usize,
}

enum Parsed {
    Frame {
        id: u32,
        id_complete: bool,
        format: FrameFormat,
        payload: Vec<u8>,
        ok: bool,
        raw_bits: usize,
    },
    Truncated,
}

struct BitSampler<'a, T> {
    samples: &'a [T],
    threshold: T,
    sof: usize,
    samples_per_bit: f64,
    next: usize,
}

impl<T: Scalar> BitSampler<'_, T> {
    /// Samples the next raw bit at its centre; `None` past the trace end.
    fn raw(&mut self) -> Option<bool> {
        let pos = self.sof + ((self.next as f64 + 0.5) * self.samples_per_bit) as usize;
        let s = *self.samples.get(pos)?;
        self.next += 1;
        Some(s < self.threshold)
    }
}

struct FrameReader<'a, 'b, T> {
    bits: &'b mut BitSampler<'a, T>,
    destuffer: Destuffer,
    unstuffed: Vec<bool>,
}

enum ReadErr {
    Eof,
    Stuff,
}

impl<T: Scalar> FrameReader<'_, '_, T> {
    fn bit(&mut self) -> Result<bool, ReadErr> {
        loop {
            let raw = self.bits.raw().ok_or(ReadErr::Eof)?;
            match self.destuffer.feed(raw) {
                Destuffed::Data(b) => {
                    self.unstuffed.push(b);
                    return Ok(b);
                }
                Destuffed::Stuff => continue,
                Destuffed::Violation => return Err(ReadErr::Stuff),
            }
        }
    }

    fn field(&mut self, width: u32) -> Result<u32, ReadErr> {
        let mut v = 0u32;
        for _ in 0..width {
            v = (v << 1) | self.bit()? as u32;
        }
        Ok(v)
    }
}

fn parse_frame<T: Scalar>(sampler: &mut BitSampler<'_, T>) -> Parsed {
    let mut rd = FrameReader {
        bits: sampler,
        destuffer: Destuffer::default(),
        unstuffed: Vec::with_capacity(128),
    };
    let mut id = 0u32;
    let mut id_complete = false;
    let mut format = FrameFormat::Standard;
    let mut payload = Vec::new();

    let body = (|| -> Result<bool, ReadErr> {
        let sof = rd.bit()?;
        let base = rd.field(11)?;
        id = base;
        let _rtr_or_srr = rd.bit()?;
        let ide = rd.bit()?;
        if ide {
            format = FrameFormat::Extended;
            let ext = rd.field(18)?;
            id = (base << 18) | ext;
            let _rtr = rd.bit()?;
            let _r1 = rd.bit()?;
        }
        id_complete = true;
        let _r0 = rd.bit()?;
        let dlc = rd.field(4)? as usize;
        for _ in 0..dlc.min(MAX_DLC) {
            payload.push(rd.field(8)? as u8);
        }
        let expected = crc15_of(&rd.unstuffed);
        let crc = rd.field(15)? as u16;
        if rd.destuffer.stuff_due() {
            let last = *rd.unstuffed.last().expect("crc bits read");
            let raw = rd.bits.raw().ok_or(ReadErr::Eof)?;
            if raw == last {
                return Err(ReadErr::Stuff);
            }
        }
        let mut form_ok = !sof;
        for &want in &TRAILER {
            let raw = rd.bits.raw().ok_or(ReadErr::Eof)?;
            form_ok &= raw == want;
        }
        Ok(form_ok && crc == expected)
    })();

    let raw_bits = rd.bits.next;
    match body {
        Ok(ok) => Parsed::Frame {
            id,
            id_complete,
            format,
            payload,
            ok,
            raw_bits,
        },
        Err(ReadErr::Stuff) => Parsed::Frame {
            id,
            id_complete,
            format,
            payload,
            ok: false,
            raw_bits,
        },
        Err(ReadErr::Eof) => Parsed::Truncated,
    }
}

/// Recovers every frame on a differential-voltage trace.
///
/// Frames failing CRC, stuffing or form checks are returned with
/// `crc_ok = false`. A frame cut off by the end of the trace is dropped.
pub fn decode_transmissions<T: Scalar>(
    trace: &SampledTrace<T>,
    bitrate: u32,
    map: &SourceAddressMap,
) -> Result<Vec<DecodedTransmission>, ProtoError> {
    decode_with_threshold(trace, bitrate, map, DOMINANT_THRESHOLD_V)
}

pub fn decode_with_threshold<T: Scalar>(
    trace: &SampledTrace<T>,
    bitrate: u32,
    map: &SourceAddressMap,
    threshold_v: f64,
) -> Result<Vec<DecodedTransmission>, ProtoError> {
    if trace.is_empty() {
        return Err(ProtoError::EmptyTrace);
    }
    let spb = trace.sample_rate / bitrate as f64;
    if spb < MIN_SAMPLES_PER_BIT {
        return Err(ProtoError::SampleRateTooLow {
            sample_rate: trace.sample_rate,
            bitrate,
        });
    }
    let threshold = T::lit(threshold_v);
    let samples = &trace.samples;
    let recessive = |i: usize| samples[i] < threshold;
    let idle_samples = (IDLE_BITS_AFTER_ERROR * spb).floor() as usize;

    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut need_idle = false;
    let mut idle_run = 0usize;
    while pos < samples.len() {
        if recessive(pos) {
            idle_run += 1;
            pos += 1;
            continue;
        }
        if need_idle && idle_run < idle_samples {
            idle_run = 0;
            pos += 1;
            continue;
        }
        let mut sampler = BitSampler {
            samples,
            threshold,
            sof: pos,
            samples_per_bit: spb,
            next: 0,
        };
        // glitch filter: SOF must still be dominant at its sample point
        let centre = pos + (0.5 * spb) as usize;
        if centre >= samples.len() {
            break;
        }
        if recessive(centre) {
            idle_run = 0;
            pos += 1;
            continue;
        }
        match parse_frame(&mut sampler) {
            Parsed::Truncated => break,
            Parsed::Frame {
                id,
                id_complete,
                format,
                payload,
                ok,
                raw_bits,
            } => {
                let sa = if id_complete {
                    map.source_address(format, id)
                } else {
                    None
                };
                out.push(DecodedTransmission {
                    t: trace.time_of(pos),
                    sa,
                    id,
                    format,
                    payload,
                    duration: raw_bits as f64 / bitrate as f64,
                    crc_ok: ok,
                    start_sample: pos,
                });
                need_idle = !ok;
                idle_run = 0;
                pos += (raw_bits as f64 * spb).round() as usize;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canproto::{serialize_frame, CanFrame, SaDerivation};

    const BR: u32 = 125_000;
    const FS: f64 = 1.25e6;

    fn render(frames: &[(usize, &CanFrame)], total_bits: usize) -> SampledTrace<f64> {
        let spb = (FS / BR as f64) as usize;
        let mut v = vec![0.0; total_bits * spb];
        for &(start, f) in frames {
            for (k, &b) in serialize_frame(f).bits().iter().enumerate() {
                if !b {
                    let s = (start + k) * spb;
                    v[s..s + spb].fill(2.0);
                }
            }
        }
        SampledTrace::new(v, FS, 0.0)
    }

    fn map() -> SourceAddressMap {
        let mut m = SourceAddressMap::new(SaDerivation::LowByteOfId);
        m.assign(SourceAddress(0x21), 0).unwrap();
        m
    }

    #[test]
    fn round_trips_clean_frames() {
        let a = CanFrame::extended(0x18FF_1021, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let b = CanFrame::standard(0x123, &[0xAA]).unwrap();
        let trace = render(&[(20, &a), (200, &b)], 400);
        let got = decode_transmissions(&trace, BR, &map()).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|d| d.crc_ok));
        assert_eq!(got[0].id, a.id());
        assert_eq!(got[0].payload, a.payload());
        assert_eq!(got[0].sa, Some(SourceAddress(0x21)));
        assert!((got[0].t - 20.0 / BR as f64).abs() < 1e-12);
        assert!((got[0].duration - serialize_frame(&a).len() as f64 / BR as f64).abs() < 1e-12);
        assert_eq!(got[1].format, FrameFormat::Standard);
        assert_eq!(got[1].sa, None);
    }

    #[test]
    fn flipped_data_bit_fails_crc() {
        let a = CanFrame::extended(0x18FF_1021, &[0; 8]).unwrap();
        let mut trace = render(&[(20, &a)], 300);
        // force one bit inside the data field recessive
        let spb = 10;
        let bit = 20 + 60;
        trace.samples[bit * spb..(bit + 1) * spb].fill(0.0);
        let got = decode_transmissions(&trace, BR, &map()).unwrap();
        assert!(!got.is_empty());
        assert!(!got[0].crc_ok);
    }

    #[test]
    fn truncated_frame_is_dropped() {
        let a = CanFrame::extended(0x18FF_1021, &[0; 8]).unwrap();
        let full = render(&[(5, &a)], 300);
        let cut = SampledTrace::new(full.samples[..800].to_vec(), FS, 0.0);
        assert!(decode_transmissions(&cut, BR, &map()).unwrap().is_empty());
    }

    #[test]
    fn glitch_is_not_a_start_of_frame() {
        let mut trace = render(&[], 100);
        trace.samples[100..103].fill(2.0);
        assert!(decode_transmissions(&trace, BR, &map()).unwrap().is_empty());
    }

    #[test]
    fn rejects_undersampled_and_empty_traces() {
        let t = SampledTrace::new(vec![0.0; 100], 9.0 * BR as f64, 0.0);
        assert!(matches!(
            decode_transmissions(&t, BR, &map()),
            Err(ProtoError::SampleRateTooLow { .. })
        ));
        let t = SampledTrace::<f64>::new(vec![], FS, 0.0);
        assert_eq!(decode_transmissions(&t, BR, &map()), Err(ProtoError::EmptyTrace));
    }
}
