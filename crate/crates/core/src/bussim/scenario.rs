use std::collections::BTreeSet;

use super::ecu::{EcuSpec, MessageSpec, PayloadGen, PowerProfile, ProgramActivity};
use super::SimError;
use crate::canproto::{FrameFormat, SaDerivation, SourceAddress, SourceAddressMap};

/// Bus-level parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BusConfig {
    /// bit/s: 125 000, 250 000 or 500 000.
    pub bitrate: u32,
    pub format: FrameFormat,
    /// Hz.
    pub sample_rate: f64,
    /// Differential level of a dominant bit, volts.
    pub dominant_volts: f64,
    /// Additive Gaussian noise on the differential voltage, volts.
    pub voltage_noise: f64,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            bitrate: 125_000,
            format: FrameFormat::Extended,
            sample_rate: 10e6,
            dominant_volts: 2.0,
            voltage_noise: 0.05,
        }
    }
}

impl BusConfig {
    pub fn samples_per_bit(&self) -> f64 {
        self.sample_rate / self.bitrate as f64
    }
}

pub const SUPPORTED_BITRATES: [u32; 3] = [125_000, 250_000, 500_000];

/// Attack scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    /// A legitimate ECU sends frames under another ECU's source address.
    CompromisedEcu,
    /// Extra hardware on the bus sends frames; it has no power channel.
    AddedModule,
    /// A legitimate ECU overwrites recessive bits of another ECU's ongoing
    /// frame and takes over the rest of it.
    HijackTransmission,
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackKind::CompromisedEcu => "compromised_ecu",
            AttackKind::AddedModule => "added_module",
            AttackKind::HijackTransmission => "hijack",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackTrigger {
    /// Explicit request times, seconds.
    Times(Vec<f64>),
    /// This many attacks spread over the scenario with seeded jitter.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Attacking ECU index; `None` for [`AttackKind::AddedModule`].
    pub attacker: Option<usize>,
    /// Source address claimed by the attack frames (the victim's for a hijack).
    pub spoofed_sa: SourceAddress,
    pub trigger: AttackTrigger,
}

impl AttackSpec {
    pub fn added_module(spoofed_sa: u8, count: usize) -> Self {
        Self {
            kind: AttackKind::AddedModule,
            attacker: None,
            spoofed_sa: SourceAddress(spoofed_sa),
            trigger: AttackTrigger::Count(count),
        }
    }

    pub fn compromised(attacker: usize, spoofed_sa: u8, count: usize) -> Self {
        Self {
            kind: AttackKind::CompromisedEcu,
            attacker: Some(attacker),
            spoofed_sa: SourceAddress(spoofed_sa),
            trigger: AttackTrigger::Count(count),
        }
    }

    pub fn hijack(attacker: usize, victim_sa: u8, times: Vec<f64>) -> Self {
        Self {
            kind: AttackKind::HijackTransmission,
            attacker: Some(attacker),
            spoofed_sa: SourceAddress(victim_sa),
            trigger: AttackTrigger::Times(times),
        }
    }
}

/// Everything [`simulate`](super::simulate) needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bus: BusConfig,
    pub ecus: Vec<EcuSpec>,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
    pub attacks: Vec<AttackSpec>,
}

/// J1939-style 29-bit identifier.
pub fn j1939_id(priority: u32, pgn: u32, sa: u8) -> u32 {
    ((priority & 0x7) << 26) | ((pgn & 0x3FFFF) << 8) | sa as u32
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.bus.sample_rate > 0.0) {
            return bad("sample rate must be positive".into());
        }
        if self.bus.bitrate == 0 {
            return bad("bitrate must be positive".into());
        }
        if self.ecus.is_empty() {
            return bad("scenario has no ECUs".into());
        }
        let mut seen = BTreeSet::new();
        let mut ids = BTreeSet::new();
        for (k, ecu) in self.ecus.iter().enumerate() {
            if ecu.index != k {
                return bad(format!("ECU at position {k} has index {}", ecu.index));
            }
            for sa in &ecu.sas {
                if !seen.insert(*sa) {
                    return bad(format!("source address {sa} owned by more than one ECU"));
                }
            }
            let p = &ecu.power;
            if !(p.signature_amplitude > 3.0 * p.noise_sigma) {
                return bad(format!(
                    "ECU {k}: signature amplitude {} must exceed 3x noise sigma {}",
                    p.signature_amplitude, p.noise_sigma
                ));
            }
            for m in &ecu.messages {
                if !ecu.owns(m.sa) {
                    return bad(format!("ECU {k} sends under source address {} it does not own", m.sa));
                }
                if !(m.period > 0.0) {
                    return bad(format!("ECU {k}: message period must be positive"));
                }
                if m.dlc > 8 {
                    return bad(format!("ECU {k}: dlc {} > 8", m.dlc));
                }
                if m.id > self.bus.format.max_id() {
                    return bad(format!(
                        "ECU {k}: id {:#x} does not fit a {} frame",
                        m.id, self.bus.format
                    ));
                }
                if !ids.insert(m.id) {
                    return bad(format!("identifier {:#x} used by two messages", m.id));
                }
                if self.bus.format == FrameFormat::Extended && (m.id & 0xFF) as u8 != m.sa.0 {
                    return bad(format!("identifier {:#x} low byte does not carry SA {}", m.id, m.sa));
                }
            }
        }
        for a in &self.attacks {
            let owner = self.ecus.iter().find(|e| e.owns(a.spoofed_sa)).map(|e| e.index);
            let Some(owner) = owner else {
                return Err(SimError::InvalidAttack(format!(
                    "spoofed source address {} belongs to no ECU",
                    a.spoofed_sa
                )));
            };
            match (a.kind, a.attacker) {
                (AttackKind::AddedModule, None) => {}
                (AttackKind::AddedModule, Some(_)) => {
                    return Err(SimError::InvalidAttack("added module has no ECU index".into()))
                }
                (_, None) => return Err(SimError::InvalidAttack(format!("{} needs an attacker ECU", a.kind))),
                (_, Some(att)) => {
                    if att >= self.ecus.len() {
                        return Err(SimError::InvalidAttack(format!("attacker ECU {att} does not exist")));
                    }
                    if att == owner {
                        return Err(SimError::InvalidAttack(format!(
                            "attacker ECU {att} already owns source address {}",
                            a.spoofed_sa
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn owner_of(&self, sa: SourceAddress) -> Option<usize> {
        self.ecus.iter().find(|e| e.owns(sa)).map(|e| e.index)
    }

    pub fn message_ids(&self) -> BTreeSet<u32> {
        self.ecus.iter().flat_map(|e| e.messages.iter().map(|m| m.id)).collect()
    }

    /// Identifier used by injected frames claiming `sa`.
    ///
    /// Extended: proprietary PGN 0xFFAA at priority 3. Standard: `0x700 | sa`.
    pub fn attack_id(&self, sa: SourceAddress) -> u32 {
        match self.bus.format {
            FrameFormat::Extended => j1939_id(3, 0xFFAA, sa.0),
            FrameFormat::Standard => 0x700 | sa.0 as u32,
        }
    }

    /// Identifier a hijacker switches to: the victim's identifier with its
    /// last-transmitted recessive bit outside the source-address byte forced
    /// dominant, skipping candidates that collide with scheduled identifiers.
    pub fn hijack_id(&self, victim_id: u32) -> Option<u32> {
        let (lo, hi) = match self.bus.format {
            FrameFormat::Extended => (8, 29),
            FrameFormat::Standard => (0, 11),
        };
        let taken = self.message_ids();
        (lo..hi)
            .filter(|b| victim_id >> b & 1 == 1)
            .map(|b| victim_id & !(1 << b))
            .find(|id| !taken.contains(id))
    }

    /// Identifier → SA → ECU map implied by the scenario, including attack
    /// identifiers.
    pub fn source_address_map(&self) -> Result<SourceAddressMap, SimError> {
        let derivation = match self.bus.format {
            FrameFormat::Extended => SaDerivation::LowByteOfId,
            FrameFormat::Standard => SaDerivation::ExplicitTable,
        };
        let mut map = SourceAddressMap::new(derivation);
        for ecu in &self.ecus {
            for &sa in &ecu.sas {
                map.assign(sa, ecu.index)?;
            }
        }
        if self.bus.format == FrameFormat::Standard {
            for ecu in &self.ecus {
                for m in &ecu.messages {
                    map.insert_id(FrameFormat::Standard, m.id, m.sa)?;
                }
            }
            for a in &self.attacks {
                match a.kind {
                    AttackKind::HijackTransmission => {
                        for m in self
                            .ecus
                            .iter()
                            .flat_map(|e| &e.messages)
                            .filter(|m| m.sa == a.spoofed_sa)
                        {
                            if let Some(id) = self.hijack_id(m.id) {
                                map.insert_id(FrameFormat::Standard, id, a.spoofed_sa)?;
                            }
                        }
                    }
                    _ => map.insert_id(FrameFormat::Standard, self.attack_id(a.spoofed_sa), a.spoofed_sa)?,
                }
            }
        }
        Ok(map)
    }

    /// Total number of periodic requests the ECUs will issue.
    pub fn scheduled_frame_count(&self) -> usize {
        self.ecus
            .iter()
            .flat_map(|e| &e.messages)
            .map(|m| message_request_count(m, self.duration))
            .sum()
    }

    /// Five ECUs with one source address each (ECU k owns SA k) on a 125 kbit/s
    /// extended-ID bus, `frames_per_ecu` eight-byte frames per ECU.
    pub fn lab(frames_per_ecu: usize, seed: u64) -> Self {
        Self::lab_variant(
            125_000,
            FrameFormat::Extended,
            ProgramActivity::Uniform,
            frames_per_ecu,
            seed,
        )
    }

    /// The lab bus at a given bitrate, identifier format and program level.
    ///
    /// Sampling is fixed at 10 samples per bit and message periods scale with
    /// the bit time, so the bus load (about 70%) and the samples per frame do
    /// not depend on the bitrate.
    pub fn lab_variant(
        bitrate: u32,
        format: FrameFormat,
        program: ProgramActivity,
        frames_per_ecu: usize,
        seed: u64,
    ) -> Self {
        let bit_scale = 125_000.0 / bitrate as f64;
        let period = 7.5e-3 * bit_scale;
        let n_ecus = 5usize;
        let ecus = (0..n_ecus)
            .map(|k| {
                let sa = SourceAddress(k as u8);
                let id = match format {
                    FrameFormat::Extended => j1939_id(6, 0xFF10 + k as u32, sa.0),
                    FrameFormat::Standard => 0x100 + 0x20 * k as u32 + sa.0 as u32,
                };
                EcuSpec {
                    index: k,
                    name: format!("ECU{}", k + 1),
                    sas: vec![sa],
                    messages: vec![MessageSpec {
                        sa,
                        id,
                        dlc: 8,
                        period,
                        offset: period * k as f64 / n_ecus as f64,
                        count: Some(frames_per_ecu),
                        payload: PayloadGen::Random,
                    }],
                    power: PowerProfile {
                        baseline_mean: 1.0 + 0.1 * k as f64,
                        noise_sigma: 0.1,
                        noise_floor_offset: 0.02 * k as f64,
                        ripple_hz: 60e3 + 70e3 * k as f64,
                        ripple_phase: 0.7 * k as f64,
                        activity_hz: 15e3 + 5e3 * k as f64,
                        program,
                        ..PowerProfile::default()
                    },
                }
            })
            .collect();
        let bus = BusConfig {
            bitrate,
            format,
            sample_rate: 10.0 * bitrate as f64,
            ..BusConfig::default()
        };
        Self {
            bus,
            ecus,
            duration: period * frames_per_ecu as f64 + 10e-3 * bit_scale,
            seed,
            attacks: Vec::new(),
        }
    }

    /// Two ECUs on a 250 kbit/s J1939 bus: "ECM" sends under SAs 0 and 15,
    /// "ABS" under SA 11 with a noisier supply and background activity.
    ///
    /// ECM's draw depends only weakly on the bit level, so its two source
    /// addresses are told apart by little more than frame timing.
    pub fn truck(frames_per_sa: usize, seed: u64) -> Self {
        let period = 2.4e-3;
        let msg = |sa: u8, pgn: u32, prio: u32, slot: usize, payload: PayloadGen| MessageSpec {
            sa: SourceAddress(sa),
            id: j1939_id(prio, pgn, sa),
            dlc: 8,
            period,
            offset: period * slot as f64 / 3.0,
            count: Some(frames_per_sa),
            payload,
        };
        let ecm = EcuSpec {
            index: 0,
            name: "ECM".into(),
            sas: vec![SourceAddress(0), SourceAddress(15)],
            messages: vec![
                msg(
                    0,
                    0xF004,
                    3,
                    0,
                    PayloadGen::Masked(vec![0xFF, 0xFF, 0xFF, 0xFF, 0, 0, 0, 0]),
                ),
                msg(15, 0xFEF1, 6, 1, PayloadGen::Counter),
            ],
            power: PowerProfile {
                baseline_mean: 2.0,
                noise_sigma: 0.1,
                bit_modulation: 0.05,
                ripple_hz: 90e3,
                ripple_phase: 0.3,
                activity_hz: 18e3,
                ..PowerProfile::default()
            },
        };
        let abs = EcuSpec {
            index: 1,
            name: "ABS".into(),
            sas: vec![SourceAddress(11)],
            messages: vec![msg(
                11,
                0xFEBF,
                6,
                2,
                PayloadGen::Masked(vec![0xFF, 0xFF, 0, 0, 0, 0, 0, 0]),
            )],
            power: PowerProfile {
                baseline_mean: 1.4,
                noise_sigma: 0.25,
                noise_floor_offset: 0.05,
                ripple_hz: 230e3,
                ripple_phase: 1.1,
                activity_hz: 30e3,
                burst_rate_hz: 20.0,
                burst_amplitude: 0.8,
                burst_duration: 400e-6,
                ..PowerProfile::default()
            },
        };
        let bus = BusConfig {
            bitrate: 250_000,
            format: FrameFormat::Extended,
            sample_rate: 2.5e6,
            ..BusConfig::default()
        };
        Self {
            bus,
            ecus: vec![ecm, abs],
            duration: period * frames_per_sa as f64 + 10e-3,
            seed,
            attacks: Vec::new(),
        }
    }

    pub fn with_attack(mut self, attack: AttackSpec) -> Self {
        self.attacks.push(attack);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

pub(crate) fn message_request_count(m: &MessageSpec, duration: f64) -> usize {
    if m.offset >= duration {
        return 0;
    }
    let by_time = ((duration - m.offset) / m.period).ceil() as usize;
    m.count.map_or(by_time, |c| c.min(by_time))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        Scenario::lab(10, 1).validate().unwrap();
        Scenario::truck(10, 1).validate().unwrap();
        for &br in &SUPPORTED_BITRATES {
            for fmt in [FrameFormat::Standard, FrameFormat::Extended] {
                Scenario::lab_variant(br, fmt, ProgramActivity::Heterogeneous, 5, 0)
                    .validate()
                    .unwrap();
            }
        }
    }

    #[test]
    fn lab_frame_budget() {
        assert_eq!(Scenario::lab(1000, 0).scheduled_frame_count(), 5000);
        assert_eq!(Scenario::truck(100, 0).scheduled_frame_count(), 300);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = Scenario::lab(10, 0);
        s.duration = 0.0;
        assert!(matches!(s.validate(), Err(SimError::InvalidScenario(_))));

        let mut s = Scenario::lab(10, 0);
        s.ecus[1].sas.push(SourceAddress(1));
        assert!(s.validate().is_err());

        let mut s = Scenario::lab(10, 0);
        s.ecus[0].power.noise_sigma = 0.5;
        assert!(s.validate().is_err());

        let s = Scenario::lab(10, 0).with_attack(AttackSpec::compromised(0, 0, 3));
        assert!(matches!(s.validate(), Err(SimError::InvalidAttack(_))));

        let s = Scenario::lab(10, 0).with_attack(AttackSpec::added_module(99, 3));
        assert!(matches!(s.validate(), Err(SimError::InvalidAttack(_))));
    }

    #[test]
    fn hijack_id_clears_a_non_sa_bit() {
        let s = Scenario::lab(10, 0);
        let victim = s.ecus[0].messages[0].id;
        let h = s.hijack_id(victim).unwrap();
        assert!(h < victim);
        assert_eq!(h & 0xFF, victim & 0xFF);
        assert_eq!((victim ^ h).count_ones(), 1);
    }

    #[test]
    fn standard_map_covers_attack_ids() {
        let s = Scenario::lab_variant(250_000, FrameFormat::Standard, ProgramActivity::Uniform, 10, 0)
            .with_attack(AttackSpec::added_module(2, 1));
        let map = s.source_address_map().unwrap();
        assert_eq!(
            map.source_address(FrameFormat::Standard, s.attack_id(SourceAddress(2))),
            Some(SourceAddress(2))
        );
        assert_eq!(map.owner(SourceAddress(2)), Some(2));
    }
}
