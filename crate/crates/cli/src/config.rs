//! Plain-text `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys, repeated keys
//! (except `attack`) and malformed values are errors naming the line.

use std::path::{Path, PathBuf};

use canoa::bussim::{AttackSpec, ProgramActivity, Scenario, SUPPORTED_BITRATES};
use canoa::canproto::FrameFormat;
use canoa::evalkit::SweepSpec;
use canoa::learn::TrainConfig;
use canoa::pipeline::PipelineConfig;
use canoa::sigfeat::{BuildConfig, SplitRatios, TukeyParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Lab,
    Truck,
}

/// Override of one ECU's power profile or message period.
#[derive(Debug, Clone, PartialEq)]
pub struct EcuOverride {
    pub ecu: usize,
    pub field: String,
    pub value: String,
    pub line: usize,
}

/// Every knob with its default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    /// Per ECU for the lab preset, per source address for the truck.
    pub frames: usize,
    pub bitrate: u32,
    pub format: FrameFormat,
    pub program: ProgramActivity,
    /// Overrides the preset's duration, seconds.
    pub duration: Option<f64>,
    pub seed: u64,
    /// Seed of the evaluation scenario of `all`; defaults to `seed + 1`.
    pub eval_seed: Option<u64>,
    pub attacks: Vec<AttackSpec>,
    pub ecu_overrides: Vec<EcuOverride>,
    pub m: usize,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub c: f64,
    pub split: SplitRatios,
    pub bootstrap: bool,
    pub bootstrap_rounds: usize,
    pub max_iters: usize,
    pub batch_size: usize,
    pub eta0: f64,
    pub calib_len: usize,
    pub sweep_frames: usize,
    /// File the configuration came from, for error messages.
    pub source: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        let build = BuildConfig::default();
        Self {
            preset: Preset::Lab,
            frames: 1000,
            bitrate: 125_000,
            format: FrameFormat::Extended,
            program: ProgramActivity::Uniform,
            duration: None,
            seed: 0,
            eval_seed: None,
            attacks: Vec::new(),
            ecu_overrides: Vec::new(),
            m: build.m,
            alpha: build.tukey.alpha,
            delta: PipelineConfig::default().delta,
            epsilon: train.epsilon,
            c: train.c,
            split: train.split,
            bootstrap: false,
            bootstrap_rounds: train.bootstrap_rounds,
            max_iters: train.max_iters,
            batch_size: train.batch_size,
            eta0: train.eta0,
            calib_len: build.calib_len,
            sweep_frames: SweepSpec::default().frames_per_ecu,
            source: None,
        }
    }
}

const POWER_FIELDS: [&str; 19] = [
    "baseline_mean",
    "noise_sigma",
    "noise_floor_offset",
    "signature_amplitude",
    "signature_rise",
    "amplitude_jitter",
    "ripple_hz",
    "ripple_depth",
    "ripple_phase",
    "bit_modulation",
    "reception_ripple",
    "activity_amplitude",
    "activity_span",
    "activity_hz",
    "burst_rate_hz",
    "burst_amplitude",
    "burst_duration",
    "program",
    "period",
];

fn parse_num<V: std::str::FromStr>(v: &str) -> Result<V, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?} as a number"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_program(v: &str) -> Result<ProgramActivity, String> {
    match v {
        "uniform" => Ok(ProgramActivity::Uniform),
        "heterogeneous" => Ok(ProgramActivity::Heterogeneous),
        _ => Err(format!("program must be uniform or heterogeneous, got {v:?}")),
    }
}

fn positive(v: f64, what: &str) -> Result<f64, String> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{what} must be positive, got {v}"))
    }
}

/// `kind key=value …`, e.g. `compromised attacker=2 sa=0 count=300`.
fn parse_attack(v: &str) -> Result<AttackSpec, String> {
    let mut parts = v.split_whitespace();
    let kind = parts.next().ok_or("empty attack")?;
    let (mut attacker, mut sa, mut count, mut times) = (None, None, None, None);
    for p in parts {
        let (k, val) = p
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {p:?}"))?;
        match k {
            "attacker" => attacker = Some(parse_num::<usize>(val)?),
            "sa" => sa = Some(parse_num::<u8>(val)?),
            "count" => count = Some(parse_num::<usize>(val)?),
            "times" => times = Some(val.split(';').map(parse_num::<f64>).collect::<Result<Vec<_>, _>>()?),
            _ => return Err(format!("unknown attack parameter {k:?}")),
        }
    }
    let sa = sa.ok_or("attack needs sa=")?;
    match kind {
        "added_module" => Ok(AttackSpec::added_module(sa, count.ok_or("added_module needs count=")?)),
        "compromised" => Ok(AttackSpec::compromised(
            attacker.ok_or("compromised needs attacker=")?,
            sa,
            count.ok_or("compromised needs count=")?,
        )),
        "hijack" => Ok(AttackSpec::hijack(
            attacker.ok_or("hijack needs attacker=")?,
            sa,
            times.ok_or("hijack needs times=t1;t2;…")?,
        )),
        _ => Err(format!(
            "attack kind must be added_module, compromised or hijack, got {kind:?}"
        )),
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = RunConfig {
            source: source.map(Path::to_path_buf),
            ..RunConfig::default()
        };
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| CliError::Config {
                path: source.map_or_else(|| PathBuf::from("<config>"), Path::to_path_buf),
                line,
                msg,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key != "attack" && !seen.insert(key.to_string()) {
                return Err(err(format!("{key} is set twice")));
            }
            cfg.set(key, value, line).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, Some(path))
    }

    fn set(&mut self, key: &str, v: &str, line: usize) -> Result<(), String> {
        match key {
            "preset" => {
                self.preset = match v {
                    "lab" => Preset::Lab,
                    "truck" => Preset::Truck,
                    _ => return Err(format!("preset must be lab or truck, got {v:?}")),
                }
            }
            "frames" => self.frames = parse_num(v)?,
            "bitrate" => {
                let br: u32 = parse_num(v)?;
                if !SUPPORTED_BITRATES.contains(&br) {
                    return Err(format!("bitrate must be one of {SUPPORTED_BITRATES:?}, got {br}"));
                }
                self.bitrate = br;
            }
            "format" => {
                self.format = match v {
                    "standard" => FrameFormat::Standard,
                    "extended" => FrameFormat::Extended,
                    _ => return Err(format!("format must be standard or extended, got {v:?}")),
                }
            }
            "program" => self.program = parse_program(v)?,
            "duration" => self.duration = Some(positive(parse_num(v)?, "duration")?),
            "seed" => self.seed = parse_num(v)?,
            "eval_seed" => self.eval_seed = Some(parse_num(v)?),
            "attack" => self.attacks.push(parse_attack(v)?),
            "m" => self.m = parse_num(v)?,
            "alpha" => self.alpha = TukeyParams::new(parse_num(v)?).map_err(|e| e.to_string())?.alpha,
            "delta" => {
                let d: f64 = parse_num(v)?;
                if !(d > 0.0 && d < 1.0) {
                    return Err(format!("delta must lie in (0, 1), got {d}"));
                }
                self.delta = d;
            }
            "epsilon" => self.epsilon = positive(parse_num(v)?, "epsilon")?,
            "c" => self.c = positive(parse_num(v)?, "c")?,
            "split" => {
                let r: Vec<f64> = v.split(',').map(|s| parse_num(s.trim())).collect::<Result<_, _>>()?;
                if r.len() != 3 {
                    return Err("split needs three comma-separated fractions".into());
                }
                self.split = SplitRatios::new(r[0], r[1], r[2]).map_err(|e| e.to_string())?;
            }
            "bootstrap" => self.bootstrap = parse_bool(v)?,
            "bootstrap_rounds" => self.bootstrap_rounds = parse_num(v)?,
            "max_iters" => self.max_iters = parse_num(v)?,
            "batch_size" => self.batch_size = parse_num(v)?,
            "eta0" => self.eta0 = positive(parse_num(v)?, "eta0")?,
            "calib_len" => self.calib_len = parse_num(v)?,
            "sweep_frames" => self.sweep_frames = parse_num(v)?,
            _ => {
                let Some(rest) = key.strip_prefix("ecu.") else {
                    return Err(format!("unknown key {key:?}"));
                };
                let (k, field) = rest
                    .split_once('.')
                    .ok_or_else(|| format!("expected ecu.<index>.<field>, got {key:?}"))?;
                let ecu: usize = parse_num(k)?;
                if !POWER_FIELDS.contains(&field) {
                    return Err(format!("unknown ECU field {field:?}"));
                }
                if field == "program" {
                    parse_program(v)?;
                } else {
                    parse_num::<f64>(v)?;
                }
                self.ecu_overrides.push(EcuOverride {
                    ecu,
                    field: field.into(),
                    value: v.into(),
                    line,
                });
            }
        }
        Ok(())
    }

    /// The configured scenario with its attacks, at `seed`.
    pub fn scenario_with_seed(&self, seed: u64) -> Result<Scenario, CliError> {
        let mut s = match self.preset {
            Preset::Lab => Scenario::lab_variant(self.bitrate, self.format, self.program, self.frames, seed),
            Preset::Truck => Scenario::truck(self.frames, seed),
        };
        if let Some(d) = self.duration {
            s.duration = d;
        }
        for o in &self.ecu_overrides {
            let Some(ecu) = s.ecus.get_mut(o.ecu) else {
                return Err(CliError::InvalidConfig(format!(
                    "line {}: the scenario has no ECU {}",
                    o.line, o.ecu
                )));
            };
            let p = &mut ecu.power;
            let x = || o.value.parse::<f64>().expect("checked while parsing");
            match o.field.as_str() {
                "baseline_mean" => p.baseline_mean = x(),
                "noise_sigma" => p.noise_sigma = x(),
                "noise_floor_offset" => p.noise_floor_offset = x(),
                "signature_amplitude" => p.signature_amplitude = x(),
                "signature_rise" => p.signature_rise = x(),
                "amplitude_jitter" => p.amplitude_jitter = x(),
                "ripple_hz" => p.ripple_hz = x(),
                "ripple_depth" => p.ripple_depth = x(),
                "ripple_phase" => p.ripple_phase = x(),
                "bit_modulation" => p.bit_modulation = x(),
                "reception_ripple" => p.reception_ripple = x(),
                "activity_amplitude" => p.activity_amplitude = x(),
                "activity_span" => p.activity_span = x(),
                "activity_hz" => p.activity_hz = x(),
                "burst_rate_hz" => p.burst_rate_hz = x(),
                "burst_amplitude" => p.burst_amplitude = x(),
                "burst_duration" => p.burst_duration = x(),
                "program" => p.program = parse_program(&o.value).expect("checked while parsing"),
                "period" => ecu.messages.iter_mut().for_each(|m| m.period = x()),
                _ => unreachable!("field list checked while parsing"),
            }
        }
        s.attacks = self.attacks.clone();
        s.validate().map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        Ok(s)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario_with_seed(self.seed)
    }

    /// The same scenario without attacks, for training.
    pub fn clean_scenario(&self) -> Result<Scenario, CliError> {
        let mut s = self.scenario()?;
        s.attacks.clear();
        Ok(s)
    }

    pub fn eval_seed(&self) -> u64 {
        self.eval_seed.unwrap_or(self.seed.wrapping_add(1))
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, CliError> {
        let cfg = PipelineConfig {
            build: BuildConfig {
                m: self.m,
                tukey: TukeyParams::new(self.alpha).map_err(|e| CliError::InvalidConfig(e.to_string()))?,
                calib_len: self.calib_len,
            },
            train: TrainConfig {
                epsilon: self.epsilon,
                max_iters: self.max_iters,
                c: self.c,
                split: self.split,
                bootstrap_rounds: self.bootstrap_rounds,
                seed: self.seed,
                batch_size: self.batch_size,
                eta0: self.eta0,
                ..TrainConfig::default()
            },
            delta: self.delta,
            bootstrap: self.bootstrap,
        };
        cfg.train
            .validate()
            .map_err(|e| CliError::InvalidConfig(e.to_string()))?;
        if cfg.build.m == 0 {
            return Err(CliError::InvalidConfig("m must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn sweep(&self) -> Result<SweepSpec, CliError> {
        Ok(SweepSpec {
            frames_per_ecu: self.sweep_frames,
            seed: self.seed,
            config: self.pipeline()?,
            ..SweepSpec::default()
        })
    }
}
