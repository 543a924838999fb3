//! One function per command. Each reads and writes files only under the
//! paths it is given and returns a summary for the caller to print.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use canoa::auth::{Decision, Verdict};
use canoa::bussim::{simulate, GroundTruthLog, Scenario};
use canoa::canproto::decode_transmissions;
use canoa::evalkit::{factor_sweep, metrics, ConfusionMatrix, FactorGrid};
use canoa::pipeline::{evaluate_traces, train_bundle, Evaluation, SenderLabel, TrafficClass, Training};
use canoa::SampledTrace;
use log::info;

use crate::bundlefile::{BundleFile, BundleMeta};
use crate::config::RunConfig;
use crate::error::{ctx, CliError};
use crate::groundtruth;
use crate::report::{confusion_table, metric_table, OutputFormat, Table};
use crate::tracefile::{TraceFile, TraceKind};

pub const VOLTAGE_FILE: &str = "voltage.ctrc";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const BUNDLE_FILE: &str = "bundle.cbnd";

pub fn power_file(ecu: usize) -> String {
    format!("power_ecu{ecu}.ctrc")
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    pub attacks: usize,
    pub duration: f64,
    pub ecus: usize,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} frames ({} attacks) from {} ECUs over {:.3} s",
            self.frames, self.attacks, self.ecus, self.duration
        )
    }
}

/// Simulates `scenario` and writes the voltage, one power file per ECU and
/// the ground-truth CSV into `out`.
pub fn simulate_to(scenario: &Scenario, out: &Path) -> Result<SimulateSummary, CliError> {
    create_dir(out)?;
    let sim = simulate::<f64>(scenario).map_err(ctx("simulating"))?;
    let narrow = |kind, t: &SampledTrace<f64>| TraceFile::from_trace(kind, t).map_err(CliError::InvalidConfig);
    narrow(TraceKind::Voltage, &sim.voltage)?.save(&out.join(VOLTAGE_FILE))?;
    for (k, p) in sim.powers.iter().enumerate() {
        narrow(TraceKind::Power, p)?.save(&out.join(power_file(k)))?;
    }
    groundtruth::save(&sim.log, &out.join(GROUND_TRUTH_FILE))?;
    Ok(SimulateSummary {
        frames: sim.log.len(),
        attacks: sim.log.attack_count(),
        duration: scenario.duration,
        ecus: sim.powers.len(),
    })
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    simulate_to(&cfg.scenario()?, out)
}

/// Traces read back from a directory written by [`simulate_to`].
#[derive(Debug, Clone)]
pub struct Traces {
    pub voltage: SampledTrace<f64>,
    pub powers: Vec<SampledTrace<f64>>,
    pub log: Option<GroundTruthLog>,
}

fn load_single(path: &Path, kind: TraceKind) -> Result<SampledTrace<f64>, CliError> {
    let f = TraceFile::load(path)?;
    if f.kind != kind || f.channels.len() != 1 {
        return Err(CliError::format(path, format!("expected one {kind:?} channel")));
    }
    Ok(f.trace(0))
}

/// Number of consecutive `power_ecu<k>` files present.
pub fn count_power_files(dir: &Path) -> usize {
    (0..).take_while(|&k| dir.join(power_file(k)).is_file()).count()
}

pub fn load_traces(dir: &Path, ecus: usize) -> Result<Traces, CliError> {
    let voltage = load_single(&dir.join(VOLTAGE_FILE), TraceKind::Voltage)?;
    let mut powers = Vec::with_capacity(ecus);
    for k in 0..ecus {
        let path = dir.join(power_file(k));
        if !path.is_file() {
            return Err(CliError::MissingChannel { ecu: k, path });
        }
        powers.push(load_single(&path, TraceKind::Power)?);
    }
    let gt = dir.join(GROUND_TRUTH_FILE);
    let log = if gt.is_file() {
        Some(groundtruth::load(&gt)?)
    } else {
        None
    };
    Ok(Traces { voltage, powers, log })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub bundle_path: PathBuf,
    pub training: Training<f64>,
    pub test_confusion: ConfusionMatrix<SenderLabel>,
    pub report: Table,
}

/// Trains on the traces in `traces` with the map and bitrate of the
/// configured scenario and writes the bundle, the per-model report, the
/// learning curves and (if enabled) the bootstrap summary into `out`.
pub fn cmd_train(traces: &Path, cfg: &RunConfig, out: &Path, fmt: OutputFormat) -> Result<TrainSummary, CliError> {
    create_dir(out)?;
    let scenario = cfg.clean_scenario()?;
    let map = scenario
        .source_address_map()
        .map_err(ctx("building the source-address map"))?;
    let t = load_traces(traces, scenario.ecus.len())?;
    let decoded = decode_transmissions(&t.voltage, scenario.bus.bitrate, &map).map_err(ctx("decoding"))?;
    info!("decoded {} transmissions", decoded.len());
    let training = train_bundle(&t.powers, decoded, &map, &cfg.pipeline()?).map_err(ctx("training"))?;
    let test_confusion = training.test_confusion(&t.powers).map_err(ctx("testing"))?;

    let bundle_path = out.join(BUNDLE_FILE);
    BundleFile {
        meta: BundleMeta {
            bitrate: scenario.bus.bitrate,
            sample_rate: t.voltage.sample_rate,
            seed: cfg.seed,
        },
        bundle: training.bundle.clone(),
    }
    .save(&bundle_path)?;

    let mut report = Table::new([
        "sa",
        "ecu",
        "val_accuracy",
        "converged_at",
        "iterations",
        "final_loss",
        "bootstrap_median",
        "bootstrap_iqr",
    ]);
    let mut curves = String::new();
    let mut boxes = String::from("# sa min q1 median q3 max\n");
    for m in &training.models {
        let r = &m.report;
        let (med, iqr) = m.bootstrap.as_ref().map_or((String::new(), String::new()), |b| {
            (format!("{:.4}", b.median), format!("{:.4}", b.iqr()))
        });
        report.push([
            m.sa.to_string(),
            m.ecu.to_string(),
            format!("{:.4}", r.val_accuracy),
            r.curve.converged_at.map_or("-".into(), |c| c.to_string()),
            r.model.meta.iterations.to_string(),
            format!("{:.6}", r.model.meta.final_loss),
            med,
            iqr,
        ]);
        let _ = writeln!(curves, "# SA {} (ECU {})\n# epoch train_loss val_loss", m.sa, m.ecu);
        for (i, (tr, va)) in r.curve.train_loss.iter().zip(&r.curve.val_loss).enumerate() {
            let _ = writeln!(curves, "{i} {tr:.8} {va:.8}");
        }
        curves.push_str("\n\n");
        if let Some(b) = &m.bootstrap {
            let _ = writeln!(boxes, "{} {} {} {} {} {}", m.sa, b.min, b.q1, b.median, b.q3, b.max);
        }
    }
    report.save(&out.join(format!("training_report.{}", fmt.extension())), fmt)?;
    write_text(&out.join("learning_curves.dat"), &curves)?;
    if cfg.bootstrap {
        write_text(&out.join("bootstrap.dat"), &boxes)?;
    }
    confusion_table(&test_confusion).save(&out.join(format!("test_confusion.{}", fmt.extension())), fmt)?;
    Ok(TrainSummary {
        bundle_path,
        training,
        test_confusion,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct AuthSummary {
    pub evaluation: Evaluation<f64>,
    /// Present when the traces came with a ground-truth log.
    pub attack_confusion: Option<ConfusionMatrix<TrafficClass>>,
    pub sender_confusion: Option<ConfusionMatrix<SenderLabel>>,
}

fn verdict_table(e: &Evaluation<f64>, sas: &[canoa::canproto::SourceAddress]) -> Table {
    let mut header: Vec<String> = [
        "t_sec",
        "frame_id",
        "claimed_sa",
        "purported_ecu",
        "winner_sa",
        "decision",
        "flagged_ecu",
        "tie",
        "multiple_positive",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(sas.iter().map(|sa| format!("p_sa{sa}")));
    let mut t = Table::new(header);
    for (d, v) in e.transmissions.iter().zip(&e.verdicts) {
        let v: &Verdict<f64> = v;
        let mut row = vec![
            format!("{}", d.t),
            format!("0x{:08X}", d.id),
            v.claimed_sa().to_string(),
            v.attribution.purported_ecu.to_string(),
            v.winner().map_or(String::new(), |s| s.to_string()),
            match v.decision {
                Decision::Authentic => "authentic".to_string(),
                Decision::Impersonation { .. } => "impersonation".to_string(),
                Decision::AddedModule => "added_module".to_string(),
            },
            v.flagged_compromised.map_or(String::new(), |k| k.to_string()),
            v.attribution.tie.to_string(),
            v.multiple_positive.to_string(),
        ];
        row.extend(v.attribution.p_tx.iter().map(|p| format!("{p:.6e}")));
        t.rows.push(row);
    }
    t
}

/// Authenticates every decoded transmission in `traces` against the bundle
/// and writes the verdict CSV to `out`, with confusion and metric tables
/// next to it when a ground-truth log is present.
pub fn cmd_authenticate(traces: &Path, bundle: &Path, out: &Path, fmt: OutputFormat) -> Result<AuthSummary, CliError> {
    let bf = BundleFile::load(bundle)?;
    let expected = bf.bundle.ecu_count();
    let got = count_power_files(traces);
    if got != expected {
        return Err(CliError::BundleMismatch { expected, got });
    }
    let t = load_traces(traces, expected)?;
    let e = evaluate_traces(&t.voltage, &t.powers, t.log.as_ref(), bf.meta.bitrate, &bf.bundle)
        .map_err(ctx("authenticating"))?;
    info!(
        "{} verdicts, mean attribution time {:?}",
        e.verdicts.len(),
        e.latency.mean()
    );
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let sas: Vec<_> = bf.bundle.entries.iter().map(|m| m.sa).collect();
    verdict_table(&e, &sas).save(out, OutputFormat::Csv)?;

    let (attack, sender) = if t.log.is_some() {
        let stem = out.with_extension("");
        let side = |name: &str| PathBuf::from(format!("{}_{name}.{}", stem.display(), fmt.extension()));
        let a = e.attack_confusion();
        let s = e.sender_confusion(&bf.bundle.map);
        confusion_table(&a).save(&side("attack_confusion"), fmt)?;
        confusion_table(&s).save(&side("sender_confusion"), fmt)?;
        metric_table(&metrics(&s)).save(&side("sender_metrics"), fmt)?;
        (Some(a), Some(s))
    } else {
        (None, None)
    };
    Ok(AuthSummary {
        evaluation: e,
        attack_confusion: attack,
        sender_confusion: sender,
    })
}

pub fn grid_table(g: &FactorGrid) -> Table {
    let mut t = Table::new([
        "bitrate",
        "format",
        "program",
        "seed",
        "accuracy",
        "precision",
        "recall",
        "f_measure",
        "error",
    ]);
    for c in &g.cells {
        let k = c.key;
        let (a, p, r, f, err) = match &c.result {
            Ok(m) => (
                format!("{:.4}", m.accuracy),
                format!("{:.4}", m.macro_precision),
                format!("{:.4}", m.macro_recall),
                format!("{:.4}", m.macro_f_measure),
                String::new(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), String::new(), e.clone()),
        };
        t.push([
            k.bitrate.to_string(),
            k.format.to_string(),
            k.program.to_string(),
            c.seed.to_string(),
            a,
            p,
            r,
            f,
            err,
        ]);
    }
    t
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, fmt: OutputFormat) -> Result<FactorGrid, CliError> {
    create_dir(out)?;
    let grid = factor_sweep(&cfg.sweep()?);
    grid_table(&grid).save(&out.join(format!("factor_grid.{}", fmt.extension())), fmt)?;
    Ok(grid)
}

#[derive(Debug, Clone)]
pub struct AllSummary {
    pub train: SimulateSummary,
    pub eval: SimulateSummary,
    pub training: TrainSummary,
    pub auth: AuthSummary,
}

/// Simulates a clean training run into `out/train` and the configured
/// scenario, attacks included, at the evaluation seed into `out/eval`;
/// trains on the first and authenticates the second.
pub fn cmd_all(cfg: &RunConfig, out: &Path, fmt: OutputFormat) -> Result<AllSummary, CliError> {
    let train_dir = out.join("train");
    let eval_dir = out.join("eval");
    let train = simulate_to(&cfg.clean_scenario()?, &train_dir)?;
    let eval = simulate_to(&cfg.scenario_with_seed(cfg.eval_seed())?, &eval_dir)?;
    let training = cmd_train(&train_dir, cfg, out, fmt)?;
    let auth = cmd_authenticate(&eval_dir, &training.bundle_path, &out.join("verdicts.csv"), fmt)?;
    Ok(AllSummary {
        train,
        eval,
        training,
        auth,
    })
}
