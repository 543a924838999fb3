//! `CTRC` binary trace container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "CTRC"          4 bytes
//! version               u16
//! kind                  u8    0 = voltage, 1 = power
//! channel_count         u16
//! sample_rate_hz        u32
//! samples_per_channel   u64
//! start_time_ns         u64
//! body                  channel-major f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use canoa::SampledTrace;

use crate::error::CliError;

pub const MAGIC: [u8; 4] = *b"CTRC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 29;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Voltage = 0,
    Power = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub kind: TraceKind,
    pub sample_rate_hz: u32,
    pub start_time_ns: u64,
    /// Equally long channels.
    pub channels: Vec<Vec<f32>>,
}

impl TraceFile {
    /// Narrows one sampled trace to a single-channel file. Fails if the
    /// sample rate is not a whole number of hertz.
    pub fn from_trace(kind: TraceKind, trace: &SampledTrace<f64>) -> Result<Self, String> {
        let rate = trace.sample_rate;
        if rate.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&rate) {
            return Err(format!(
                "sample rate {rate} Hz is not a whole number of hertz in u32 range"
            ));
        }
        Ok(Self {
            kind,
            sample_rate_hz: rate as u32,
            start_time_ns: (trace.start_time * 1e9).round().max(0.0) as u64,
            channels: vec![trace.samples.iter().map(|&v| v as f32).collect()],
        })
    }

    /// Widens channel `k` back to a sampled trace.
    pub fn trace(&self, k: usize) -> SampledTrace<f64> {
        SampledTrace::new(
            self.channels[k].iter().map(|&v| v as f64).collect(),
            self.sample_rate_hz as f64,
            self.start_time_ns as f64 * 1e-9,
        )
    }

    pub fn samples_per_channel(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let n = self.samples_per_channel();
        assert!(self.channels.iter().all(|c| c.len() == n), "ragged channels");
        let count = u16::try_from(self.channels.len()).expect("at most 65535 channels");
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.kind as u8])?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&self.sample_rate_hz.to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.start_time_ns.to_le_bytes())?;
        let mut buf = Vec::with_capacity(n * 4);
        for c in &self.channels {
            buf.clear();
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Parses a whole file; `Err` carries a description of what is wrong.
    pub fn read_from(r: &mut impl Read) -> Result<Self, String> {
        let mut h = [0u8; HEADER_LEN];
        r.read_exact(&mut h).map_err(|e| format!("truncated header: {e}"))?;
        if h[0..4] != MAGIC {
            return Err(format!("bad magic {:?}", &h[0..4]));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let kind = match h[6] {
            0 => TraceKind::Voltage,
            1 => TraceKind::Power,
            k => return Err(format!("unknown trace kind {k}")),
        };
        let count = u16::from_le_bytes([h[7], h[8]]) as usize;
        let sample_rate_hz = u32::from_le_bytes(h[9..13].try_into().expect("4 bytes"));
        let n = u64::from_le_bytes(h[13..21].try_into().expect("8 bytes"));
        let start_time_ns = u64::from_le_bytes(h[21..29].try_into().expect("8 bytes"));
        let n = usize::try_from(n).map_err(|_| "sample count does not fit in memory".to_string())?;
        let mut body = Vec::new();
        r.read_to_end(&mut body).map_err(|e| e.to_string())?;
        let expected = count
            .checked_mul(n)
            .and_then(|v| v.checked_mul(4))
            .ok_or("body size overflows")?;
        if body.len() != expected {
            return Err(format!("body holds {} bytes, header promises {expected}", body.len()));
        }
        let channels = body
            .chunks_exact(4 * n.max(1))
            .take(count)
            .map(|c| {
                c.chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                    .collect()
            })
            .collect::<Vec<Vec<f32>>>();
        let channels = if n == 0 { vec![Vec::new(); count] } else { channels };
        Ok(Self {
            kind,
            sample_rate_hz,
            start_time_ns,
            channels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let f = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_from(&mut BufReader::new(f)).map_err(|m| CliError::format(path, m))
    }
}
