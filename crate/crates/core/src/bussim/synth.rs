use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ecu::{EcuSpec, ProgramActivity};
use super::rng::stream_rng;
use super::scenario::BusConfig;
use super::timeline::{BusTimeline, Transmitter};
use crate::scalar::Scalar;
use crate::trace::SampledTrace;

/// RNG stream of the voltage noise.
pub(crate) const VOLTAGE_STREAM: u64 = 0;

/// RNG stream of ECU `k`'s power trace.
pub(crate) fn power_stream(k: usize) -> u64 {
    1 + k as u64
}

fn sample_count(duration: f64, sample_rate: f64) -> usize {
    (duration * sample_rate).round() as usize
}

fn add_noise(buf: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma > 0.0 {
        for v in buf.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
}

fn finish<T: Scalar>(buf: Vec<f64>, sample_rate: f64) -> SampledTrace<T> {
    SampledTrace::new(buf.into_iter().map(T::lit).collect(), sample_rate, 0.0)
}

/// Differential bus voltage: dominant bits at `bus.dominant_volts`, recessive
/// and idle at 0 V, plus white Gaussian noise of `bus.voltage_noise`.
pub fn synth_voltage<T: Scalar>(timeline: &BusTimeline, bus: &BusConfig, duration: f64, seed: u64) -> SampledTrace<T> {
    let n = sample_count(duration, bus.sample_rate);
    let spb = bus.sample_rate / timeline.bitrate as f64;
    let mut v = vec![0.0f64; n];
    for frame in &timeline.frames {
        for (k, &bit) in frame.bits.bits().iter().enumerate() {
            if bit {
                continue;
            }
            let tick = frame.start_bit + k as u64;
            let s0 = BusTimeline::tick_to_sample(tick, spb).min(n);
            let s1 = BusTimeline::tick_to_sample(tick + 1, spb).min(n);
            v[s0..s1].fill(bus.dominant_volts);
        }
    }
    let mut rng = stream_rng(seed, VOLTAGE_STREAM);
    add_noise(&mut v, bus.voltage_noise, &mut rng);
    finish(v, bus.sample_rate)
}

/// Smooth bump on `[0, 1]`, zero at both ends.
#[inline]
fn bump(u: f64) -> f64 {
    let s = (PI * u).sin();
    s * s
}

fn add_activity_burst(p: &mut [f64], centre: f64, span: f64, amp: f64, freq: f64, phase: f64, fs: f64) {
    let n = p.len();
    let a = ((centre - span / 2.0) * fs).ceil().max(0.0) as usize;
    let b = (((centre + span / 2.0) * fs).ceil().max(0.0) as usize).min(n);
    for (j, v) in p.iter_mut().enumerate().take(b).skip(a) {
        let t = j as f64 / fs;
        let u = (t - (centre - span / 2.0)) / span;
        *v += amp * bump(u) * (1.0 + 0.5 * (2.0 * PI * freq * t + phase).sin());
    }
}

/// Power drawn by one ECU over the scenario.
///
/// Baseline Gaussian noise around `baseline_mean + noise_floor_offset`, plus
/// over each interval the ECU drives the bus a step of height
/// `signature_amplitude` (per-frame jitter, exponential edges, extra draw on
/// dominant bits, ECU-specific harmonic), plus `reception_ripple` on dominant
/// bits driven by others. Program activity bursts sit on the edges of every
/// own transmission; background bursts arrive as a Poisson process.
pub fn synth_power<T: Scalar>(
    ecu: &EcuSpec,
    timeline: &BusTimeline,
    bus: &BusConfig,
    duration: f64,
    seed: u64,
) -> SampledTrace<T> {
    let fs = bus.sample_rate;
    let n = sample_count(duration, fs);
    let spb = fs / timeline.bitrate as f64;
    let prof = &ecu.power;
    let me = Transmitter::Ecu(ecu.index);
    let mut rng = stream_rng(seed, power_stream(ecu.index));

    let mut p = vec![prof.baseline_mean + prof.noise_floor_offset; n];
    add_noise(&mut p, prof.noise_sigma, &mut rng);

    let tick_sample = |tick: u64| BusTimeline::tick_to_sample(tick, spb).min(n);
    let tail_len = (5.0 * prof.signature_rise * fs).ceil() as usize;

    for frame in &timeline.frames {
        let bits = frame.bits.bits();
        for seg in &frame.segments {
            if seg.by == me {
                let amp = prof.signature_amplitude * (1.0 + prof.amplitude_jitter * rng.random_range(-1.0..=1.0));
                let ts = tick_sample(frame.start_bit + seg.bits.start as u64);
                let te = tick_sample(frame.start_bit + seg.bits.end as u64);
                let mut env_end = 0.0;
                for k in seg.bits.clone() {
                    let dom = if bits[k] { 0.0 } else { 1.0 };
                    let modulation = 1.0 + prof.bit_modulation * (dom - 0.5);
                    let s0 = tick_sample(frame.start_bit + k as u64);
                    let s1 = tick_sample(frame.start_bit + k as u64 + 1);
                    for (j, v) in p.iter_mut().enumerate().take(s1).skip(s0) {
                        let rel = (j - ts) as f64 / fs;
                        let env = 1.0 - (-rel / prof.signature_rise).exp();
                        let ripple =
                            1.0 + prof.ripple_depth * (2.0 * PI * prof.ripple_hz * rel + prof.ripple_phase).sin();
                        *v += amp * env * modulation * ripple;
                        env_end = env;
                    }
                }
                for (i, v) in p.iter_mut().skip(te).take(tail_len).enumerate() {
                    *v += amp * env_end * (-(i as f64) / fs / prof.signature_rise).exp();
                }

                let (t_start, t_end) = (ts as f64 / fs, te as f64 / fs);
                for centre in [t_start, t_end] {
                    let (a, f, ph) = match prof.program {
                        ProgramActivity::Uniform => (prof.activity_amplitude, prof.activity_hz, 0.0),
                        ProgramActivity::Heterogeneous => (
                            prof.activity_amplitude * rng.random_range(0.5..1.5),
                            prof.activity_hz * rng.random_range(0.3..3.0),
                            rng.random_range(0.0..2.0 * PI),
                        ),
                    };
                    if a > 0.0 {
                        add_activity_burst(&mut p, centre, prof.activity_span, a, f, ph, fs);
                    }
                }
            } else if prof.reception_ripple != 0.0 {
                for k in seg.bits.clone() {
                    if !bits[k] {
                        let s0 = tick_sample(frame.start_bit + k as u64);
                        let s1 = tick_sample(frame.start_bit + k as u64 + 1);
                        for v in &mut p[s0..s1] {
                            *v += prof.reception_ripple;
                        }
                    }
                }
            }
        }
    }

    if prof.burst_rate_hz > 0.0 && prof.burst_amplitude != 0.0 {
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            t += -u.ln() / prof.burst_rate_hz;
            if t >= duration {
                break;
            }
            let amp = prof.burst_amplitude * rng.random_range(0.7..1.3);
            let freq = prof.activity_hz * rng.random_range(0.5..2.0);
            add_activity_burst(
                &mut p,
                t + prof.burst_duration / 2.0,
                prof.burst_duration,
                amp,
                freq,
                0.0,
                fs,
            );
        }
    }

    finish(p, fs)
}
