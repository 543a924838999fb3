use canoa::bussim::{
    simulate, synth_power, synth_voltage, AttackKind, AttackSpec, BusConfig, BusTimeline, Scenario, Transmitter,
};
use canoa::canproto::{decode_transmissions, FrameFormat, SourceAddress};

fn quiet_lab(frames: usize) -> Scenario {
    let mut s = Scenario::lab(frames, 3);
    s.bus.voltage_noise = 0.0;
    s
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn empty_timeline_gives_idle_voltage() {
    let bus = BusConfig::default();
    let tl = BusTimeline {
        bitrate: bus.bitrate,
        frames: vec![],
    };
    let v = synth_voltage::<f64>(&tl, &bus, 1e-3, 0);
    assert_eq!(v.len(), 10_000);
    assert!(mean(&v.samples).abs() < 0.01);
    assert!(v.samples.iter().all(|x| x.abs() < 0.5));
}

#[test]
fn bit_spans_eighty_samples_at_ten_megahertz() {
    let mut s = quiet_lab(2);
    s.bus.sample_rate = 10e6;
    let sim = simulate::<f64>(&s).unwrap();
    let f = &sim.timeline.frames[1];
    let first = (f.start_bit * 80) as usize;
    // dominant SOF followed by a recessive identifier MSB (priority 6)
    assert_eq!(sim.voltage.samples[first - 1], 0.0);
    assert!(sim.voltage.samples[first..first + 80].iter().all(|&x| x == 2.0));
    assert_eq!(sim.voltage.samples[first + 80], 0.0);
}

#[test]
fn thresholding_noiseless_voltage_recovers_stuffed_bits() {
    let s = quiet_lab(3);
    let sim = simulate::<f64>(&s).unwrap();
    let spb = s.bus.samples_per_bit();
    for f in &sim.timeline.frames {
        let got: Vec<bool> = (0..f.bits.len())
            .map(|k| {
                let centre = ((f.start_bit as f64 + k as f64 + 0.5) * spb) as usize;
                sim.voltage.samples[centre] < 1.0
            })
            .collect();
        assert_eq!(got, f.bits.bits());
    }
}

#[test]
fn idle_noiseless_ecu_sits_at_baseline() {
    let mut s = quiet_lab(2);
    s.ecus[2].power.noise_sigma = 0.0;
    let tl = BusTimeline {
        bitrate: s.bus.bitrate,
        frames: vec![],
    };
    let p = synth_power::<f64>(&s.ecus[2], &tl, &s.bus, 2e-3, 9);
    let level = s.ecus[2].power.baseline_mean + s.ecus[2].power.noise_floor_offset;
    assert!(p.samples.iter().all(|&x| (x - level).abs() < 1e-12));
}

#[test]
fn transmit_step_matches_signature_amplitude() {
    let s = Scenario::lab(40, 11);
    let sim = simulate::<f64>(&s).unwrap();
    let spb = s.bus.samples_per_bit();
    let fs = s.bus.sample_rate;
    let guard = (300e-6 * fs) as usize;
    for ecu in &s.ecus {
        let p = &sim.powers[ecu.index].samples;
        let mut busy = vec![false; p.len()];
        let mut tx = Vec::new();
        for f in &sim.timeline.frames {
            let a = (f.start_bit as f64 * spb) as usize;
            let b = ((f.end_bit() as f64 * spb) as usize).min(p.len());
            let lo = a.saturating_sub(guard);
            let hi = (b + guard).min(p.len());
            busy[lo..hi].iter_mut().for_each(|x| *x = true);
            if f.transmitted_by(Transmitter::Ecu(ecu.index)) {
                tx.extend_from_slice(&p[a..b]);
            }
        }
        let idle: Vec<f64> = p.iter().zip(&busy).filter(|(_, &b)| !b).map(|(&x, _)| x).collect();
        assert!(idle.len() > 1000, "not enough idle samples");
        let step = mean(&tx) - mean(&idle);
        let amp = ecu.power.signature_amplitude;
        assert!((step - amp).abs() <= 0.1 * amp, "ECU {}: step {step}", ecu.index);
    }
}

#[test]
fn same_seed_same_traces() {
    let s = Scenario::truck(20, 5).with_attack(AttackSpec::compromised(1, 0, 5));
    let a = simulate::<f32>(&s).unwrap();
    let b = simulate::<f32>(&s).unwrap();
    assert_eq!(a.voltage.samples, b.voltage.samples);
    for (x, y) in a.powers.iter().zip(&b.powers) {
        assert_eq!(x.samples, y.samples);
    }
    assert_eq!(a.log, b.log);
    let c = simulate::<f32>(&s.clone().with_seed(6)).unwrap();
    assert_ne!(a.powers[0].samples, c.powers[0].samples);
}

#[test]
fn power_noise_is_independent_across_ecus() {
    let mut s = Scenario::lab(5, 2);
    s.duration = 0.15;
    let sim = simulate::<f64>(&s).unwrap();
    // past the last frame every trace is baseline noise only
    let quiet_from =
        ((sim.timeline.frames.last().unwrap().end_bit() as f64 + 200.0) * s.bus.samples_per_bit()) as usize;
    let n = sim.powers[0].len();
    assert!(n - quiet_from >= 100_000);
    for i in 0..s.ecus.len() {
        for j in i + 1..s.ecus.len() {
            let r = pearson(
                &sim.powers[i].samples[quiet_from..],
                &sim.powers[j].samples[quiet_from..],
            );
            assert!(r.abs() < 0.05, "ECUs {i},{j}: rho {r}");
        }
    }
}

fn frame_excess(sim: &canoa::bussim::Simulation<f64>, s: &Scenario, frame: usize, ecu: usize) -> f64 {
    let f = &sim.timeline.frames[frame];
    let spb = s.bus.samples_per_bit();
    let a = (f.start_bit as f64 * spb) as usize;
    let b = (f.end_bit() as f64 * spb) as usize;
    let p = &s.ecus[ecu].power;
    mean(&sim.powers[ecu].samples[a..b]) - p.baseline_mean - p.noise_floor_offset
}

#[test]
fn one_signature_per_normal_frame_none_for_added_module() {
    let s = Scenario::lab(60, 8).with_attack(AttackSpec::added_module(0, 30));
    let sim = simulate::<f64>(&s).unwrap();
    assert_eq!(sim.log.len(), sim.timeline.frames.len());
    for (i, e) in sim.log.entries.iter().enumerate() {
        let carrying: Vec<usize> = (0..s.ecus.len())
            .filter(|&k| frame_excess(&sim, &s, i, k) > 0.5)
            .collect();
        match e.attack {
            None => assert_eq!(carrying, vec![e.true_source_index().unwrap()]),
            Some(AttackKind::AddedModule) => assert!(carrying.is_empty(), "frame {i}: {carrying:?}"),
            Some(k) => panic!("unexpected {k}"),
        }
    }
}

trait SourceIndex {
    fn true_source_index(&self) -> Option<usize>;
}

impl SourceIndex for canoa::bussim::GroundTruthEntry {
    fn true_source_index(&self) -> Option<usize> {
        match self.true_source {
            Transmitter::Ecu(k) => Some(k),
            Transmitter::AddedModule => None,
        }
    }
}

#[test]
fn compromised_ecu_carries_signature_under_victim_sa() {
    let s = Scenario::lab(60, 4).with_attack(AttackSpec::compromised(3, 1, 20));
    let sim = simulate::<f64>(&s).unwrap();
    let attacks: Vec<usize> = (0..sim.log.len()).filter(|&i| sim.log.entries[i].is_attack()).collect();
    assert_eq!(attacks.len(), 20);
    for i in attacks {
        let e = &sim.log.entries[i];
        assert_eq!(e.claimed_sa, Some(SourceAddress(1)));
        assert_eq!(e.true_source, Transmitter::Ecu(3));
        assert!(frame_excess(&sim, &s, i, 3) > 0.5);
        assert!(frame_excess(&sim, &s, i, 1) < 0.5);
    }
}

#[test]
fn lab_traffic_decodes_completely() {
    let s = Scenario::lab(1000, 21);
    let sim = simulate::<f32>(&s).unwrap();
    assert_eq!(sim.log.len(), 5000);
    assert!(sim.log.entries.iter().all(|e| e.attack.is_none()));
    let decoded = decode_transmissions(&sim.voltage, s.bus.bitrate, &sim.map).unwrap();
    assert_eq!(decoded.len(), 5000);
    for (d, e) in decoded.iter().zip(&sim.log.entries) {
        assert!(d.crc_ok);
        assert_eq!(d.id, e.frame_id);
        assert_eq!(d.sa, e.claimed_sa);
        assert!((d.t - e.t).abs() < 1.0 / s.bus.sample_rate + 1e-12);
    }
}

#[test]
fn thousand_added_module_frames_are_logged() {
    let s = Scenario::lab(1000, 22).with_attack(AttackSpec::added_module(0, 1000));
    let sim = simulate::<f32>(&s).unwrap();
    assert_eq!(sim.log.attack_count(), 1000);
    assert_eq!(sim.log.len(), 6000);
    assert!(sim
        .log
        .entries
        .iter()
        .filter(|e| e.is_attack())
        .all(|e| e.attack == Some(AttackKind::AddedModule)
            && e.true_source == Transmitter::AddedModule
            && e.claimed_sa == Some(SourceAddress(0))));
}

#[test]
fn hijack_overwrites_identifier_and_truncates_victim() {
    let s = Scenario::lab(20, 13).with_attack(AttackSpec::hijack(4, 2, vec![0.05]));
    let sim = simulate::<f64>(&s).unwrap();
    let i = sim.log.entries.iter().position(|e| e.is_attack()).unwrap();
    let e = &sim.log.entries[i];
    let victim_id = s.ecus[2].messages[0].id;
    assert_eq!(e.attack, Some(AttackKind::HijackTransmission));
    assert_eq!(e.true_source, Transmitter::Ecu(4));
    assert_eq!(e.claimed_sa, Some(SourceAddress(2)));

    let decoded = decode_transmissions(&sim.voltage, s.bus.bitrate, &sim.map).unwrap();
    let d = decoded.iter().find(|d| (d.t - e.t).abs() < 1e-6).unwrap();
    assert!(d.crc_ok);
    assert_ne!(d.id, victim_id);
    assert_eq!(d.sa, Some(SourceAddress(2)));

    let f = &sim.timeline.frames[i];
    assert_eq!(f.segments.len(), 2);
    assert_eq!(f.segments[0].by, Transmitter::Ecu(2));
    assert_eq!(f.segments[1].by, Transmitter::Ecu(4));
    let split = f.segments[0].bits.end;
    assert!(split > 1 && split < 32);
    // victim draws only over the prefix, attacker over the rest
    let spb = s.bus.samples_per_bit();
    let at = |k: usize| ((f.start_bit as f64 + k as f64) * spb) as usize;
    let tail = |ecu: usize| mean(&sim.powers[ecu].samples[at(split + 20)..at(f.bits.len())]);
    let base = |ecu: usize| s.ecus[ecu].power.baseline_mean + s.ecus[ecu].power.noise_floor_offset;
    assert!(tail(2) - base(2) < 0.5);
    assert!(tail(4) - base(4) > 0.5);
}

#[test]
fn standard_format_traffic_decodes() {
    let s = Scenario::lab_variant(
        500_000,
        FrameFormat::Standard,
        canoa::bussim::ProgramActivity::Heterogeneous,
        50,
        1,
    )
    .with_attack(AttackSpec::added_module(3, 10));
    let sim = simulate::<f64>(&s).unwrap();
    let decoded = decode_transmissions(&sim.voltage, s.bus.bitrate, &sim.map).unwrap();
    assert_eq!(decoded.len(), sim.log.len());
    for (d, e) in decoded.iter().zip(&sim.log.entries) {
        assert!(d.crc_ok);
        assert_eq!(d.sa, e.claimed_sa);
    }
}
