//! Ground-truth log as CSV:
//! `t_sec,frame_id,claimed_sa,true_source,attack_kind`.

use std::path::Path;

use canoa::bussim::{AttackKind, GroundTruthEntry, GroundTruthLog, Transmitter};
use canoa::canproto::SourceAddress;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const HEADER: [&str; 5] = ["t_sec", "frame_id", "claimed_sa", "true_source", "attack_kind"];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    t_sec: f64,
    frame_id: String,
    claimed_sa: Option<u8>,
    true_source: String,
    attack_kind: String,
}

fn parse_source(s: &str) -> Result<Transmitter, String> {
    if s == "added" {
        return Ok(Transmitter::AddedModule);
    }
    s.strip_prefix("ecu")
        .and_then(|k| k.parse().ok())
        .map(Transmitter::Ecu)
        .ok_or_else(|| format!("bad true_source {s:?}"))
}

fn parse_attack(s: &str) -> Result<Option<AttackKind>, String> {
    Ok(match s {
        "" => None,
        "compromised_ecu" => Some(AttackKind::CompromisedEcu),
        "added_module" => Some(AttackKind::AddedModule),
        "hijack" => Some(AttackKind::HijackTransmission),
        other => return Err(format!("bad attack_kind {other:?}")),
    })
}

pub fn write_csv(log: &GroundTruthLog, w: impl std::io::Write) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in &log.entries {
        out.serialize(Row {
            t_sec: e.t,
            frame_id: format!("0x{:08X}", e.frame_id),
            claimed_sa: e.claimed_sa.map(|s| s.0),
            true_source: e.true_source.to_string(),
            attack_kind: e.attack.map_or(String::new(), |a| a.to_string()),
        })?;
    }
    if log.entries.is_empty() {
        out.write_record(HEADER)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses the CSV and checks that times strictly increase.
pub fn read_csv(r: impl std::io::Read) -> Result<GroundTruthLog, String> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut entries: Vec<GroundTruthEntry> = Vec::new();
    for (i, row) in rd.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| format!("line {line}: {e}"))?;
        let id = row
            .frame_id
            .strip_prefix("0x")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .ok_or_else(|| format!("line {line}: bad frame_id {:?}", row.frame_id))?;
        if entries.last().is_some_and(|p| p.t >= row.t_sec) {
            return Err(format!("line {line}: t_sec does not increase"));
        }
        entries.push(GroundTruthEntry {
            t: row.t_sec,
            frame_id: id,
            claimed_sa: row.claimed_sa.map(SourceAddress),
            true_source: parse_source(&row.true_source).map_err(|e| format!("line {line}: {e}"))?,
            attack: parse_attack(&row.attack_kind).map_err(|e| format!("line {line}: {e}"))?,
        });
    }
    Ok(GroundTruthLog { entries })
}

pub fn save(log: &GroundTruthLog, path: &Path) -> Result<(), CliError> {
    let f = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_csv(log, std::io::BufWriter::new(f)).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn load(path: &Path) -> Result<GroundTruthLog, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(std::io::BufReader::new(f)).map_err(|m| CliError::format(path, m))
}
