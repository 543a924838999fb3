//! Seeded simulation of a CAN bus with per-ECU power-line side channels.
//!
//! A [`Scenario`] lists ECUs with their messages and power profiles, plus
//! optional attacks. [`simulate`] resolves arbitration bit by bit and returns
//! the differential bus voltage, one power trace per ECU and a ground-truth
//! log of every frame.

mod ecu;
mod rng;
mod scenario;
mod simulate;
mod synth;
mod timeline;

pub use ecu::{EcuSpec, MessageSpec, PayloadGen, PowerProfile, ProgramActivity};
pub use scenario::{j1939_id, AttackKind, AttackSpec, AttackTrigger, BusConfig, Scenario, SUPPORTED_BITRATES};
pub use simulate::{simulate, GroundTruthEntry, GroundTruthLog, Simulation};
pub use synth::{synth_power, synth_voltage};
pub use timeline::{BusTimeline, TimelineFrame, Transmitter, TxSegment};

use crate::canproto::ProtoError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Proto(#[from] ProtoError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid attack: {0}")]
    InvalidAttack(String),
}
