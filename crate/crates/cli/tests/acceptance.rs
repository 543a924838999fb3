//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use canoa::auth::{softmax, Decision};
use canoa::bussim::ProgramActivity;
use canoa::bussim::{
    simulate, synth_voltage, AttackSpec, BusConfig, BusTimeline, Scenario, TimelineFrame, Transmitter,
};
use canoa::canproto::*;
use canoa::evalkit::{factor_sweep, CellKey, SweepSpec};
use canoa::learn::Problem;
use canoa::pipeline::{
    evaluate, evaluate_traces, Experiment, ExperimentReport, PipelineConfig, SenderLabel, TrafficClass,
};
use canoa::sigfeat::{covariance, fit_pca, symmetric_eigen, tukey_window, SpectrumPlan, TukeyParams};
use canoa::SampledTrace;
use canoa_cli::commands::{cmd_all, load_traces, power_file, BUNDLE_FILE, VOLTAGE_FILE};
use canoa_cli::{BundleFile, OutputFormat, RunConfig, TraceFile, TraceKind};
use nalgebra::{DMatrix, SymmetricEigen as NaEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

// 1. protocol round trip

fn random_frame(rng: &mut ChaCha8Rng, format: FrameFormat) -> CanFrame {
    let len = rng.random_range(0..=8usize);
    let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
    match format {
        FrameFormat::Standard => CanFrame::standard(rng.random::<u32>() & MAX_STANDARD_ID, &payload),
        FrameFormat::Extended => CanFrame::extended(rng.random::<u32>() & MAX_EXTENDED_ID, &payload),
    }
    .expect("valid random frame")
}

fn bus(bitrate: u32) -> BusConfig {
    BusConfig {
        bitrate,
        sample_rate: 10.0 * bitrate as f64,
        voltage_noise: 0.05,
        ..BusConfig::default()
    }
}

fn render(frames: &[CanFrame], cfg: &BusConfig, seed: u64) -> (Vec<u64>, SampledTrace<f64>) {
    let mut start = 7u64;
    let mut tl = BusTimeline {
        bitrate: cfg.bitrate,
        frames: Vec::new(),
    };
    let mut starts = Vec::new();
    for f in frames {
        let bits = serialize_frame(f);
        let len = bits.len() as u64;
        tl.frames.push(TimelineFrame::single(start, bits, Transmitter::Ecu(0)));
        starts.push(start);
        start += len + INTERFRAME_BITS;
    }
    let duration = (start + 20) as f64 / cfg.bitrate as f64;
    (starts, synth_voltage(&tl, cfg, duration, seed))
}

fn protocol() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let map = SourceAddressMap::new(SaDerivation::ExplicitTable);
    let groups: Vec<(u32, FrameFormat)> = [125_000, 250_000, 500_000]
        .iter()
        .flat_map(|&b| [(b, FrameFormat::Standard), (b, FrameFormat::Extended)])
        .collect();
    let total = 10_000;
    let (mut sent, mut errors) = (0usize, 0usize);
    for (g, &(br, format)) in groups.iter().enumerate() {
        let n = total / groups.len() + usize::from(g < total % groups.len());
        let frames: Vec<CanFrame> = (0..n).map(|_| random_frame(&mut rng, format)).collect();
        for (c, chunk) in frames.chunks(250).enumerate() {
            let (_, v) = render(chunk, &bus(br), (g * 1000 + c) as u64);
            let got = decode_transmissions(&v, br, &map).expect("decodable voltage");
            sent += chunk.len();
            errors += chunk.len().abs_diff(got.len());
            for (d, f) in got.iter().zip(chunk) {
                if !d.crc_ok || d.id != f.id() || d.format != f.format() || d.payload[..] != *f.payload() {
                    errors += 1;
                }
            }
        }
    }

    // every bit up to the CRC delimiter of one fixed frame
    let frame = CanFrame::extended(0x18FE_F100, &[0x12, 0x34, 0x56, 0x78, 0x9A, 0xBC, 0xDE, 0xF0]).unwrap();
    let cfg = BusConfig {
        voltage_noise: 0.0,
        ..bus(250_000)
    };
    let (starts, clean) = render(std::slice::from_ref(&frame), &cfg, 1);
    let wire = serialize_frame(&frame);
    let crc_end = wire.len() - 10;
    let mut missed = 0;
    for k in 1..crc_end {
        let mut v = clean.clone();
        let s = (starts[0] as usize + k) * 10;
        v.samples[s..s + 10].fill(if wire.bits()[k] { 2.0 } else { 0.0 });
        let got = decode_transmissions(&v, cfg.bitrate, &map).expect("decodable voltage");
        if got.iter().any(|d| d.crc_ok) {
            missed += 1;
        }
    }
    let el = t0.elapsed();
    check(
        errors == 0 && missed == 0 && el < Duration::from_secs(30),
        format!(
            "{sent} frames, {errors} errors; {} corruptions, {missed} undetected; {}",
            crc_end - 1,
            secs(el)
        ),
    )
}

// 2, 3, 5, 8. lab bus

struct Lab {
    report: ExperimentReport<f64>,
    elapsed: Duration,
}

fn lab_run() -> Lab {
    let t0 = Instant::now();
    // 1000 frames per ECU, 5000 in all
    let report = Experiment::<f64>::new(Scenario::lab(1000, 1), PipelineConfig::default())
        .with_evaluation(Scenario::lab(1000, 2).with_attack(AttackSpec::added_module(0, 1000)))
        .run()
        .expect("lab experiment");
    Lab {
        report,
        elapsed: t0.elapsed(),
    }
}

fn lab_shape(lab: &Lab) -> Outcome {
    let r = &lab.report;
    let tau_ms = r.training.bundle.tau.seconds() * 1e3;
    let tau_ok = (tau_ms - 1.02).abs() <= 0.102;
    let min_val = r
        .training
        .models
        .iter()
        .map(|m| m.report.val_accuracy)
        .fold(f64::INFINITY, f64::min);
    let min_diag = r
        .test_confusion
        .diagonal_rates()
        .into_iter()
        .filter(|(l, _)| *l != SenderLabel::Unattributed)
        .map(|(_, d)| d)
        .fold(f64::INFINITY, f64::min);
    check(
        tau_ok && min_val >= 0.99 && min_diag >= 0.99 && lab.elapsed < Duration::from_secs(600),
        format!(
            "tau {tau_ms:.4} ms (1.02 ±10%), min val accuracy {min_val:.4}, min diagonal {min_diag:.4}, {} models; {}",
            r.training.models.len(),
            secs(lab.elapsed)
        ),
    )
}

fn attacks(lab: &Lab) -> Outcome {
    let e = lab.report.evaluation.as_ref().expect("evaluation ran");
    let cm = e.attack_confusion();
    let attack = cm.rate(&TrafficClass::Attack, &TrafficClass::Attack);
    let normal = cm.rate(&TrafficClass::Normal, &TrafficClass::Normal);
    let n_attack = cm.index_of(&TrafficClass::Attack).map_or(0, |i| cm.row_total(i));

    let bundle = &lab.report.training.bundle;
    let scen = Scenario::lab(1000, 3).with_attack(AttackSpec::compromised(2, 0, 1000));
    let sim = simulate::<f64>(&scen).expect("compromised simulation");
    let ce = evaluate(&sim, scen.bus.bitrate, bundle).expect("compromised evaluation");
    let imp = ce
        .verdicts
        .iter()
        .zip(&ce.truth)
        .filter(|(_, g)| g.as_ref().is_some_and(|g| g.is_attack()))
        .filter(|(v, g)| {
            let k = match g.as_ref().unwrap().true_source {
                Transmitter::Ecu(k) => k,
                _ => return false,
            };
            matches!(v.decision, Decision::Impersonation { ecu, .. } if ecu == k)
        })
        .count();
    let (flag_ok, flag_total) = ce.flagged_correctly();
    let frac = imp as f64 / flag_total.max(1) as f64;
    check(
        attack == 1.0 && normal >= 0.99 && n_attack == 1000 && flag_total == 1000 && frac >= 0.99,
        format!(
            "added module: attack {attack:.4} over {n_attack}, normal {normal:.4}; compromised: {imp}/{flag_total} impersonation naming the attacker ({flag_ok} flagged correctly)"
        ),
    )
}

fn convergence(runs: &[&ExperimentReport<f64>]) -> Outcome {
    let eps = 1e-4;
    let mut worst_delta = 0.0f64;
    let mut worst_std = 0.0f64;
    let mut unconverged = 0;
    let mut n = 0;
    for r in runs {
        for m in &r.training.models {
            n += 1;
            let c = &m.report.curve;
            let Some(k) = c.converged_at.filter(|&k| k >= 1) else {
                unconverged += 1;
                continue;
            };
            worst_delta = worst_delta.max((c.val_loss[k] - c.val_loss[k - 1]).abs());
            let tail = &c.val_loss[k..];
            let mean = tail.iter().sum::<f64>() / tail.len() as f64;
            let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64;
            worst_std = worst_std.max(var.sqrt());
        }
    }
    check(
        unconverged == 0 && worst_delta < eps && worst_std < 1.0,
        format!("{n} models, {unconverged} unconverged, max delta {worst_delta:.2e}, max post-convergence std {worst_std:.2e}"),
    )
}

fn latency(lab: &Lab) -> Outcome {
    let e = lab.report.evaluation.as_ref().expect("evaluation ran");
    let mean = e.latency.mean();
    check(
        mean <= Duration::from_millis(10) && e.latency.count > 0,
        format!(
            "mean {:.3} ms, max {:.3} ms over {} transmissions",
            mean.as_secs_f64() * 1e3,
            e.latency.max.as_secs_f64() * 1e3,
            e.latency.count
        ),
    )
}

// 4. truck bus

fn truck_run() -> ExperimentReport<f64> {
    Experiment::<f64>::new(Scenario::truck(1000, 1), PipelineConfig::default())
        .with_evaluation(Scenario::truck(1000, 2))
        .run()
        .expect("truck experiment")
}

fn siblings(r: &ExperimentReport<f64>) -> Outcome {
    let cm = &r.test_confusion;
    let bundle = &r.training.bundle;
    let label = |sa: u8| SenderLabel::Sender {
        ecu: bundle.entry(SourceAddress(sa)).expect("SA in bundle").ecu,
        sa: SourceAddress(sa),
    };
    let (s0, s15, s11) = (label(0), label(15), label(11));
    let c_0_15 = cm.rate(&s0, &s15);
    let c_15_0 = cm.rate(&s15, &s0);
    let to_11 = cm.rate(&s0, &s11).max(cm.rate(&s15, &s11));

    let e = r.evaluation.as_ref().expect("evaluation ran");
    let owner = |sa: SourceAddress| bundle.entry(sa).map(|m| m.ecu);
    let mut sibling_wins = 0;
    let mut escalated = 0;
    for (v, g) in e.verdicts.iter().zip(&e.truth) {
        if !g.as_ref().is_some_and(|g| !g.is_attack()) {
            continue;
        }
        let Some(w) = v.winner() else { continue };
        if w != v.claimed_sa() && owner(w) == owner(v.claimed_sa()) {
            sibling_wins += 1;
            if matches!(v.decision, Decision::Impersonation { .. }) {
                escalated += 1;
            }
        }
    }
    check(
        (c_0_15 > 0.0 || c_15_0 > 0.0) && to_11 < 0.01 && escalated == 0,
        format!(
            "0→15 {c_0_15:.4}, 15→0 {c_15_0:.4}, max into SA 11 {to_11:.4}; {sibling_wins} sibling wins, {escalated} escalated"
        ),
    )
}

// 6. numerical suites

fn numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut fails = Vec::new();

    let mut parseval = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..600);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let spec = SpectrumPlan::<f64>::new(n).transform(&x);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
        parseval = parseval.max((time - freq).abs() / time);
    }
    if parseval > 1e-6 {
        fails.push("parseval");
    }

    let mut tukey_ok = true;
    for _ in 0..200 {
        let len = rng.random_range(2..3000);
        let alpha = rng.random_range(1e-3..=1.0);
        let w = tukey_window::<f64>(len, TukeyParams::new(alpha).unwrap());
        tukey_ok &= w[0] == 0.0 && w[len - 1] == 0.0;
    }
    if !tukey_ok {
        fails.push("tukey");
    }

    // correlated Gaussian-ish rows
    let (n, d, k) = (600, 30, 12);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let base: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..d)
                .map(|j| base[j] * (d - j) as f64 + 0.5 * base[(j + 1) % d])
                .collect()
        })
        .collect();
    let basis = fit_pca(&rows, k).unwrap();
    let mut ortho = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = basis.components[i]
                .iter()
                .zip(&basis.components[j])
                .map(|(a, b)| a * b)
                .sum();
            ortho = ortho.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    if ortho > 1e-9 {
        fails.push("pca orthonormality");
    }
    let (_, cov) = covariance(&rows);
    let ours = symmetric_eigen(&cov, d);
    let mut oracle: Vec<f64> = NaEigen::new(DMatrix::from_row_slice(d, d, &cov))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    let eig = ours
        .values
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / oracle[0];
    let var = basis
        .explained_variance
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / oracle[0];
    if eig.max(var) > 1e-6 {
        fails.push("eigen oracle");
    }

    let mut fd_err = 0.0f64;
    for _ in 0..50 {
        let (n, m) = (40, 5);
        let x: Vec<f64> = (0..n * m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let p = Problem::new(&x, m, &y);
        let idx: Vec<usize> = (0..n).collect();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        if idx.iter().any(|&i| (y[i] * p.margin(&w, b, i) - 1.0).abs() <= 1e-3) {
            continue;
        }
        let h = 1e-6;
        let (gw, gb) = p.subgradient(&w, b, 0.1, &idx);
        for j in 0..m {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let fd = (p.objective(&wp, b, 0.1, &idx) - p.objective(&wm, b, 0.1, &idx)) / (2.0 * h);
            fd_err = fd_err.max((fd - gw[j]).abs());
        }
        let fd = (p.objective(&w, b + h, 0.1, &idx) - p.objective(&w, b - h, 0.1, &idx)) / (2.0 * h);
        fd_err = fd_err.max((fd - gb).abs());
    }
    if fd_err > 1e-4 {
        fails.push("hinge subgradient");
    }

    let mut sm = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..20);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-700.0..700.0)).collect();
        sm = sm.max((softmax(&v).iter().sum::<f64>() - 1.0).abs());
    }
    if sm > 1e-9 {
        fails.push("softmax");
    }

    check(
        fails.is_empty(),
        format!(
            "parseval {parseval:.1e}, tukey endpoints {}, orthonormality {ortho:.1e}, eigen {eig:.1e}, pca variance {var:.1e}, subgradient {fd_err:.1e}, softmax {sm:.1e}{}",
            if tukey_ok { "exact" } else { "nonzero" },
            if fails.is_empty() { String::new() } else { format!("; failed: {}", fails.join(", ")) }
        ),
    )
}

// 7. factor sweep

fn sweep() -> Outcome {
    let t0 = Instant::now();
    let grid = factor_sweep(&SweepSpec::default());
    let el = t0.elapsed();
    let simplest = CellKey {
        bitrate: 125_000,
        format: FrameFormat::Standard,
        program: ProgramActivity::Uniform,
    };
    let hardest = CellKey {
        bitrate: 500_000,
        format: FrameFormat::Extended,
        program: ProgramActivity::Heterogeneous,
    };
    let acc = |k: &CellKey| grid.get(k).and_then(|c| c.accuracy());
    let failures = grid.failures();
    let (s, h) = (acc(&simplest), acc(&hardest));
    let lowest = grid
        .cells
        .iter()
        .filter_map(|c| c.accuracy())
        .fold(f64::INFINITY, f64::min);
    let pass = grid.cells.len() == 12
        && failures == 0
        && matches!((s, h), (Some(s), Some(h)) if s >= h && h >= 0.95)
        && el < Duration::from_secs(1800);
    check(
        pass,
        format!(
            "{} cells, {failures} failed; simplest {}, hardest {}, lowest {lowest:.4}; {}",
            grid.cells.len(),
            s.map_or("-".into(), |v| format!("{v:.4}")),
            h.map_or("-".into(), |v| format!("{v:.4}")),
            secs(el)
        ),
    )
}

// 9. persistence

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().expect("temporary directory");
    let cfg = RunConfig::parse("preset = lab\nframes = 200\nseed = 9\n", None).expect("config");
    let all = cmd_all(&cfg, dir.path(), OutputFormat::Csv).expect("simulate, train and authenticate");
    let eval_dir = dir.path().join("eval");

    // reread every trace file, compare with the f32 rendering of a fresh simulation
    let sim = simulate::<f64>(&cfg.scenario_with_seed(cfg.eval_seed()).unwrap()).expect("simulation");
    let mut trace_ok = true;
    let mut files = vec![(VOLTAGE_FILE.to_string(), TraceKind::Voltage, &sim.voltage)];
    for (k, p) in sim.powers.iter().enumerate() {
        files.push((power_file(k), TraceKind::Power, p));
    }
    for (name, kind, orig) in &files {
        let path = eval_dir.join(name);
        let bytes = std::fs::read(&path).expect("trace file");
        let f = TraceFile::load(&path).expect("trace file");
        let mut again = Vec::new();
        f.write_to(&mut again).unwrap();
        let expect = TraceFile::from_trace(*kind, orig).unwrap();
        trace_ok &= again == bytes
            && f.channels[0]
                .iter()
                .map(|v| v.to_bits())
                .eq(expect.channels[0].iter().map(|v| v.to_bits()))
            && f.kind == *kind;
    }

    let bpath = dir.path().join(BUNDLE_FILE);
    let bytes = std::fs::read(&bpath).expect("bundle file");
    let loaded = BundleFile::load(&bpath).expect("bundle file");
    let bundle_ok = loaded.to_bytes() == bytes && loaded.bundle == all.training.training.bundle;
    let t = load_traces(&eval_dir, loaded.bundle.ecu_count()).expect("traces");
    let e = evaluate_traces(
        &t.voltage,
        &t.powers,
        t.log.as_ref(),
        loaded.meta.bitrate,
        &loaded.bundle,
    )
    .expect("authentication with the reloaded bundle");
    let same = e.verdicts == all.auth.evaluation.verdicts;
    check(
        trace_ok && bundle_ok && same && e.verdicts.len() >= 1000,
        format!(
            "{} frames, {} trace files bit-exact: {trace_ok}, bundle bytes identical: {bundle_ok}, {} verdicts identical: {same}",
            sim.log.len(),
            files.len(),
            e.verdicts.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut emit = |n: u32, name: &'static str, o: Outcome| {
        println!("{} {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    emit(1, "protocol round-trip", protocol());
    let lab = lab_run();
    emit(2, "lab reproduction", lab_shape(&lab));
    emit(3, "attack detection", attacks(&lab));
    let truck = truck_run();
    emit(4, "sibling source addresses", siblings(&truck));
    emit(5, "convergence", convergence(&[&lab.report, &truck]));
    emit(6, "numerical suites", numerics());
    emit(7, "factor sweep", sweep());
    emit(8, "latency", latency(&lab));
    emit(9, "persistence", persistence());
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
