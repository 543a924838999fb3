use rand::Rng;

use super::rng::stream_rng;
use super::scenario::{message_request_count, AttackKind, AttackTrigger, Scenario};
use super::synth::{synth_power, synth_voltage};
use super::timeline::{BusTimeline, TimelineFrame, Transmitter, TxSegment};
use super::SimError;
use crate::canproto::{arbitrate, serialize_frame, CanFrame, SourceAddress, SourceAddressMap};
use crate::scalar::Scalar;
use crate::trace::SampledTrace;

const PAYLOAD_STREAM_BASE: u64 = 1 << 20;
const ATTACK_STREAM_BASE: u64 = 1 << 21;

/// One frame that made it onto the bus.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    /// SOF time, seconds.
    pub t: f64,
    pub frame_id: u32,
    pub claimed_sa: Option<SourceAddress>,
    /// For a hijack, the attacker that finished the frame.
    pub true_source: Transmitter,
    /// `None` for normal traffic.
    pub attack: Option<AttackKind>,
}

impl GroundTruthEntry {
    pub fn is_attack(&self) -> bool {
        self.attack.is_some()
    }
}

/// Oracle log of everything transmitted, in bus order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLog {
    pub entries: Vec<GroundTruthEntry>,
}

impl GroundTruthLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn attack_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_attack()).count()
    }

    /// Entry whose SOF lies within `tolerance` seconds of `t`.
    pub fn find(&self, t: f64, tolerance: f64) -> Option<&GroundTruthEntry> {
        let i = self.entries.partition_point(|e| e.t < t - tolerance);
        self.entries.get(i).filter(|e| (e.t - t).abs() <= tolerance)
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    pub voltage: SampledTrace<T>,
    /// One trace per ECU, by ECU index.
    pub powers: Vec<SampledTrace<T>>,
    pub log: GroundTruthLog,
    pub timeline: BusTimeline,
    pub map: SourceAddressMap,
}

#[derive(Debug, Clone)]
struct RequestMeta {
    origin: Transmitter,
    attack: Option<AttackKind>,
    /// Set once a hijacker takes the frame over: (attacker, victim frame).
    hijack: Option<(usize, CanFrame)>,
}

fn attack_times(trigger: &AttackTrigger, duration: f64, rng: &mut impl Rng) -> Vec<f64> {
    match trigger {
        AttackTrigger::Times(ts) => ts.clone(),
        AttackTrigger::Count(c) => {
            let usable = duration * 0.98;
            let slot = usable / *c as f64;
            (0..*c)
                .map(|i| (i as f64 + 0.5 + 0.6 * (rng.random::<f64>() - 0.5)) * slot)
                .collect()
        }
    }
}

/// Runs a scenario: schedules all traffic, resolves arbitration, realizes
/// the attacks and synthesizes the voltage and power traces.
///
/// Deterministic in `(scenario, scenario.seed)`.
pub fn simulate<T: Scalar>(scenario: &Scenario) -> Result<Simulation<T>, SimError> {
    scenario.validate()?;
    let map = scenario.source_address_map()?;
    let bus = &scenario.bus;
    let format = bus.format;

    let mut requests: Vec<(CanFrame, f64)> = Vec::new();
    let mut metas: Vec<RequestMeta> = Vec::new();

    let mut stream = PAYLOAD_STREAM_BASE;
    for ecu in &scenario.ecus {
        for m in &ecu.messages {
            let mut rng = stream_rng(scenario.seed, stream);
            stream += 1;
            for n in 0..message_request_count(m, scenario.duration) {
                let t = m.offset + n as f64 * m.period;
                let payload = m.payload.generate(m.dlc, n, &mut rng);
                requests.push((CanFrame::new(m.id, format, &payload)?, t));
                metas.push(RequestMeta {
                    origin: Transmitter::Ecu(ecu.index),
                    attack: None,
                    hijack: None,
                });
            }
        }
    }

    let mut hijacks: Vec<(f64, usize, SourceAddress)> = Vec::new();
    for (ai, attack) in scenario.attacks.iter().enumerate() {
        let mut rng = stream_rng(scenario.seed, ATTACK_STREAM_BASE + ai as u64);
        let times = attack_times(&attack.trigger, scenario.duration, &mut rng);
        match attack.kind {
            AttackKind::HijackTransmission => {
                let attacker = attack.attacker.expect("validated");
                hijacks.extend(times.into_iter().map(|t| (t, attacker, attack.spoofed_sa)));
            }
            kind => {
                let id = scenario.attack_id(attack.spoofed_sa);
                let origin = match attack.attacker {
                    Some(k) => Transmitter::Ecu(k),
                    None => Transmitter::AddedModule,
                };
                for t in times {
                    let payload: Vec<u8> = (0..8).map(|_| rng.random()).collect();
                    requests.push((CanFrame::new(id, format, &payload)?, t));
                    metas.push(RequestMeta {
                        origin,
                        attack: Some(kind),
                        hijack: None,
                    });
                }
            }
        }
    }

    let mut schedule = arbitrate(&requests, bus.bitrate)?;

    if !hijacks.is_empty() {
        hijacks.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rng = stream_rng(scenario.seed, ATTACK_STREAM_BASE + scenario.attacks.len() as u64);
        for (t, attacker, victim_sa) in hijacks {
            let tick = (t * bus.bitrate as f64).ceil() as u64;
            let target = schedule.iter().find(|s| {
                let meta = &metas[s.request];
                s.start_bit >= tick
                    && meta.attack.is_none()
                    && meta.hijack.is_none()
                    && map.source_address(s.frame.format(), s.frame.id()) == Some(victim_sa)
            });
            let Some(target) = target else {
                return Err(SimError::InvalidAttack(format!(
                    "no frame from source address {victim_sa} to hijack after t = {t}"
                )));
            };
            let r = target.request;
            let victim = requests[r].0.clone();
            let id = scenario.hijack_id(victim.id()).ok_or_else(|| {
                SimError::InvalidAttack(format!(
                    "identifier {:#x} has no recessive bit to overwrite",
                    victim.id()
                ))
            })?;
            let payload: Vec<u8> = (0..victim.dlc()).map(|_| rng.random()).collect();
            requests[r].0 = CanFrame::new(id, format, &payload)?;
            metas[r].attack = Some(AttackKind::HijackTransmission);
            metas[r].hijack = Some((attacker, victim));
        }
        schedule = arbitrate(&requests, bus.bitrate)?;
    }

    let total_bits = (scenario.duration * bus.bitrate as f64).floor() as u64;
    let mut frames = Vec::with_capacity(schedule.len());
    let mut log = GroundTruthLog::default();
    for s in schedule {
        if s.end_bit() > total_bits {
            continue;
        }
        let meta = &metas[s.request];
        let (frame, true_source) = match &meta.hijack {
            Some((attacker, victim)) => {
                let victim_bits = serialize_frame(victim);
                let split = victim_bits
                    .bits()
                    .iter()
                    .zip(s.bits.bits())
                    .position(|(v, a)| v != a)
                    .expect("hijack identifier differs from the victim's");
                let owner = meta.origin;
                let len = s.bits.len();
                let frame = TimelineFrame {
                    start_bit: s.start_bit,
                    bits: s.bits,
                    segments: vec![
                        TxSegment {
                            by: owner,
                            bits: 0..split,
                        },
                        TxSegment {
                            by: Transmitter::Ecu(*attacker),
                            bits: split..len,
                        },
                    ],
                };
                (frame, Transmitter::Ecu(*attacker))
            }
            None => (TimelineFrame::single(s.start_bit, s.bits, meta.origin), meta.origin),
        };
        log.entries.push(GroundTruthEntry {
            t: s.start_bit as f64 / bus.bitrate as f64,
            frame_id: s.frame.id(),
            claimed_sa: map.source_address(s.frame.format(), s.frame.id()),
            true_source,
            attack: meta.attack,
        });
        frames.push(frame);
    }

    let timeline = BusTimeline {
        bitrate: bus.bitrate,
        frames,
    };
    let voltage = synth_voltage(&timeline, bus, scenario.duration, scenario.seed);
    let powers = scenario
        .ecus
        .iter()
        .map(|ecu| synth_power(ecu, &timeline, bus, scenario.duration, scenario.seed))
        .collect();

    Ok(Simulation {
        voltage,
        powers,
        log,
        timeline,
        map,
    })
}
