//! `CBND` model bundle container.
//!
//! `magic "CBND" | version u16 | sections… | sha256 footer`, where every
//! section is `tag [u8; 4] | length u64 | payload` and the footer is the
//! SHA-256 of all preceding bytes. Sections: one `META`, one `SAMP` (the
//! source-address map) and one `MODL` per source address. Numbers are
//! little-endian; reals are stored as `f64`.

use std::path::Path;

use canoa::auth::{ModelBundle, SaModel};
use canoa::canproto::{FrameFormat, SaDerivation, SourceAddress, SourceAddressMap};
use canoa::learn::{Platt, SvmModel, TrainMeta};
use canoa::sigfeat::{NormStats, PcaBasis, Tau, TukeyParams};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MAGIC: [u8; 4] = *b"CBND";
pub const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

/// Facts about the training run stored next to the models.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleMeta {
    pub bitrate: u32,
    pub sample_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleFile {
    pub meta: BundleMeta,
    pub bundle: ModelBundle<f64>,
}

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("section count fits in u32"));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize, String> {
        let n = self.u32()? as usize;
        // every element takes at least one byte
        if n > self.buf.len() - self.pos {
            return Err(format!("length {n} exceeds the remaining section"));
        }
        Ok(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>, String> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn format_code(f: FrameFormat) -> u8 {
    match f {
        FrameFormat::Standard => 0,
        FrameFormat::Extended => 1,
    }
}

fn section(out: &mut Out, tag: &[u8; 4], body: Out) {
    out.0.extend_from_slice(tag);
    out.u64(body.0.len() as u64);
    out.0.extend_from_slice(&body.0);
}

fn encode_model(e: &SaModel<f64>) -> Out {
    let mut o = Out::default();
    o.u8(e.sa.0);
    o.u32(e.ecu as u32);
    o.f64s(&e.model.w);
    o.f64(e.model.b);
    o.f64(e.model.platt.a);
    o.f64(e.model.platt.b);
    o.u64(e.model.meta.iterations as u64);
    o.f64(e.model.meta.final_loss);
    o.f64(e.model.meta.epsilon);
    o.u8(e.model.meta.converged as u8);
    o.f64(e.stats.mean);
    o.f64(e.stats.std);
    o.f64s(&e.basis.mean);
    o.len(e.basis.components.len());
    for c in &e.basis.components {
        o.f64s(c);
    }
    o.f64s(&e.basis.explained_variance);
    o.f64(e.basis.total_variance);
    o
}

fn decode_model(r: &mut In) -> Result<SaModel<f64>, String> {
    let sa = SourceAddress(r.u8()?);
    let ecu = r.u32()? as usize;
    let w = r.f64s()?;
    let b = r.f64()?;
    let platt = Platt {
        a: r.f64()?,
        b: r.f64()?,
    };
    let meta = TrainMeta {
        iterations: r.u64()? as usize,
        final_loss: r.f64()?,
        epsilon: r.f64()?,
        converged: r.u8()? != 0,
    };
    let stats = NormStats {
        mean: r.f64()?,
        std: r.f64()?,
    };
    let mean = r.f64s()?;
    let k = r.len()?;
    let components = (0..k).map(|_| r.f64s()).collect::<Result<Vec<_>, _>>()?;
    if components.iter().any(|c| c.len() != mean.len()) {
        return Err(format!("SA {sa}: PCA components do not match the mean length"));
    }
    let explained_variance = r.f64s()?;
    let total_variance = r.f64()?;
    Ok(SaModel {
        sa,
        ecu,
        model: SvmModel { w, b, platt, meta },
        basis: PcaBasis {
            mean,
            components,
            explained_variance,
            total_variance,
        },
        stats,
    })
}

impl BundleFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let b = &self.bundle;
        let mut out = Out::default();
        out.0.extend_from_slice(&MAGIC);
        out.0.extend_from_slice(&VERSION.to_le_bytes());

        let mut meta = Out::default();
        meta.u32(self.meta.bitrate);
        meta.f64(self.meta.sample_rate);
        meta.u64(self.meta.seed);
        meta.f64(b.tau.seconds());
        meta.u32(b.m as u32);
        meta.f64(b.tukey.alpha);
        meta.f64(b.delta);
        section(&mut out, b"META", meta);

        let mut map = Out::default();
        map.u8(match b.map.derivation() {
            SaDerivation::LowByteOfId => 0,
            SaDerivation::ExplicitTable => 1,
        });
        let owners: Vec<(SourceAddress, usize)> = b.map.owners().collect();
        map.len(owners.len());
        for (sa, ecu) in owners {
            map.u8(sa.0);
            map.u32(ecu as u32);
        }
        let ids: Vec<(FrameFormat, u32, SourceAddress)> = b.map.explicit_entries().collect();
        map.len(ids.len());
        for (f, id, sa) in ids {
            map.u8(format_code(f));
            map.u32(id);
            map.u8(sa.0);
        }
        section(&mut out, b"SAMP", map);

        for e in &b.entries {
            section(&mut out, b"MODL", encode_model(e));
        }
        let digest = Sha256::digest(&out.0);
        out.0.extend_from_slice(&digest);
        out.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 6 + DIGEST_LEN {
            return Err("file too short".into());
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err("checksum mismatch".into());
        }
        let mut r = In { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let mut meta = None;
        let mut map = None;
        let mut entries = Vec::new();
        while !r.done() {
            let tag: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            let len = usize::try_from(r.u64()?).map_err(|_| "section too large")?;
            let mut s = In {
                buf: r.take(len)?,
                pos: 0,
            };
            match &tag {
                b"META" => {
                    let bm = BundleMeta {
                        bitrate: s.u32()?,
                        sample_rate: s.f64()?,
                        seed: s.u64()?,
                    };
                    let tau = Tau::new(s.f64()?).map_err(|e| e.to_string())?;
                    let m = s.u32()? as usize;
                    let tukey = TukeyParams::new(s.f64()?).map_err(|e| e.to_string())?;
                    let delta = s.f64()?;
                    meta = Some((bm, tau, m, tukey, delta));
                }
                b"SAMP" => {
                    let derivation = match s.u8()? {
                        0 => SaDerivation::LowByteOfId,
                        1 => SaDerivation::ExplicitTable,
                        d => return Err(format!("unknown SA derivation {d}")),
                    };
                    let mut m = SourceAddressMap::new(derivation);
                    for _ in 0..s.len()? {
                        let sa = SourceAddress(s.u8()?);
                        let ecu = s.u32()? as usize;
                        m.assign(sa, ecu).map_err(|e| e.to_string())?;
                    }
                    for _ in 0..s.len()? {
                        let format = match s.u8()? {
                            0 => FrameFormat::Standard,
                            1 => FrameFormat::Extended,
                            f => return Err(format!("unknown frame format {f}")),
                        };
                        let id = s.u32()?;
                        let sa = SourceAddress(s.u8()?);
                        m.insert_id(format, id, sa).map_err(|e| e.to_string())?;
                    }
                    map = Some(m);
                }
                b"MODL" => entries.push(decode_model(&mut s)?),
                other => return Err(format!("unknown section {:?}", String::from_utf8_lossy(other))),
            }
            if !s.done() {
                return Err(format!("trailing bytes in section {:?}", String::from_utf8_lossy(&tag)));
            }
        }
        let (bm, tau, m, tukey, delta) = meta.ok_or("missing META section")?;
        let map = map.ok_or("missing SAMP section")?;
        let bundle = ModelBundle::new(entries, tau, m, tukey, delta, map).map_err(|e| e.to_string())?;
        Ok(Self { meta: bm, bundle })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| CliError::format(path, m))
    }
}
