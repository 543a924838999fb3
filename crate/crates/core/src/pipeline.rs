//! The processing chain run end to end.
//!
//! [`train_bundle`] turns decoded traffic and power traces into a
//! [`ModelBundle`]; [`evaluate`] authenticates every decoded transmission of
//! a simulation against a bundle and scores the verdicts with the
//! ground-truth log. [`Experiment`] chains both over two scenarios.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::auth::{AuthError, Authenticator, LatencyStats, ModelBundle, SaModel, Verdict};
use crate::bussim::{simulate, GroundTruthEntry, GroundTruthLog, Scenario, SimError, Simulation, Transmitter};
use crate::canproto::{decode_transmissions, DecodedTransmission, ProtoError, SourceAddress, SourceAddressMap};
use crate::evalkit::{ConfusionMatrix, EvalError};
use crate::learn::{bootstrap_accuracy, train, BootstrapSummary, LearnError, TrainConfig, TrainReport};
use crate::scalar::Scalar;
use crate::sigfeat::{build_datasets, estimate_tau, stratified_split, BuildConfig, FeatureSet, Partition, SigError};
use crate::trace::SampledTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Proto(#[from] ProtoError),
    #[error(transparent)]
    Feature(#[from] SigError),
    #[error("training the model for SA {sa}: {source}")]
    Learn { sa: SourceAddress, source: LearnError },
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no CRC-valid transmission with a known source address was decoded")]
    NoTransmissions,
}

/// Knobs of the whole chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub build: BuildConfig,
    pub train: TrainConfig,
    /// Threshold on the calibrated transmission probability.
    pub delta: f64,
    /// Also run [`bootstrap_accuracy`] per model.
    pub bootstrap: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            build: BuildConfig::default(),
            train: TrainConfig::default(),
            delta: 0.5,
            bootstrap: false,
        }
    }
}

/// Sender of a transmission as `(ECU, SA)`, or no model above δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SenderLabel {
    Sender { ecu: usize, sa: SourceAddress },
    Unattributed,
}

impl fmt::Display for SenderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SenderLabel::Sender { ecu, sa } => write!(f, "E{ecu}/SA{sa}"),
            SenderLabel::Unattributed => f.write_str("none"),
        }
    }
}

/// Ground-truth or predicted class of a frame in attack detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrafficClass {
    Normal,
    Attack,
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrafficClass::Normal => "Normal",
            TrafficClass::Attack => "Attack",
        })
    }
}

/// Truth label of a verdict: the owner of the claimed SA.
pub fn claimed_sender<T: Scalar>(v: &Verdict<T>) -> SenderLabel {
    SenderLabel::Sender {
        ecu: v.attribution.purported_ecu,
        sa: v.claimed_sa(),
    }
}

/// Predicted label of a verdict: the winning SA and its owner.
pub fn predicted_sender<T: Scalar>(v: &Verdict<T>, map: &SourceAddressMap) -> SenderLabel {
    match v.winner().and_then(|sa| map.owner(sa).map(|ecu| (ecu, sa))) {
        Some((ecu, sa)) => SenderLabel::Sender { ecu, sa },
        None => SenderLabel::Unattributed,
    }
}

/// Sender confusion over verdicts of legitimate traffic.
pub fn sender_confusion<T: Scalar>(verdicts: &[Verdict<T>], map: &SourceAddressMap) -> ConfusionMatrix<SenderLabel> {
    let mut labels: Vec<SenderLabel> = map.owners().map(|(sa, ecu)| SenderLabel::Sender { ecu, sa }).collect();
    labels.push(SenderLabel::Unattributed);
    let mut cm = ConfusionMatrix::with_labels(labels);
    for v in verdicts {
        cm.add(&claimed_sender(v), &predicted_sender(v, map));
    }
    cm
}

/// One trained per-SA model with its diagnostics.
#[derive(Debug, Clone)]
pub struct TrainedModel<T> {
    pub ecu: usize,
    pub sa: SourceAddress,
    pub report: TrainReport<T>,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Output of [`train_bundle`].
#[derive(Debug, Clone)]
pub struct Training<T> {
    pub bundle: ModelBundle<T>,
    /// Ordered like the datasets: by ECU, then SA.
    pub models: Vec<TrainedModel<T>>,
    /// Every decoded transmission, valid or not.
    pub decoded: Vec<DecodedTransmission>,
    /// Partition of each decoded transmission.
    pub partition: Vec<Partition>,
    pub features: FeatureSet<T>,
}

impl<T: Scalar> Training<T> {
    /// Decoded transmissions that became rows of the given partition.
    pub fn transmissions(&self, part: Partition) -> Vec<DecodedTransmission> {
        self.features
            .rows
            .iter()
            .filter(|&&i| self.partition[i] == part)
            .map(|&i| self.decoded[i].clone())
            .collect()
    }

    /// Authenticates the held-out test transmissions.
    pub fn test_verdicts(&self, powers: &[SampledTrace<T>]) -> Result<(Vec<Verdict<T>>, LatencyStats), PipelineError> {
        let rate = powers.first().map_or(1.0, |p| p.sample_rate);
        let auth = Authenticator::new(&self.bundle, rate)?;
        Ok(auth.verdicts_timed(&self.transmissions(Partition::Test), powers)?)
    }

    /// Sender confusion on the test partition.
    pub fn test_confusion(&self, powers: &[SampledTrace<T>]) -> Result<ConfusionMatrix<SenderLabel>, PipelineError> {
        let (verdicts, _) = self.test_verdicts(powers)?;
        Ok(sender_confusion(&verdicts, &self.bundle.map))
    }
}

/// Transmissions the models can score: CRC-valid with an owned SA.
pub fn usable(decoded: &[DecodedTransmission], map: &SourceAddressMap) -> Vec<DecodedTransmission> {
    decoded
        .iter()
        .filter(|d| d.crc_ok && d.sa.is_some_and(|sa| map.owner(sa).is_some()))
        .cloned()
        .collect()
}

/// Estimates τ, splits the traffic per SA, builds the datasets and trains
/// one model per SA in parallel.
pub fn train_bundle<T: Scalar>(
    powers: &[SampledTrace<T>],
    decoded: Vec<DecodedTransmission>,
    map: &SourceAddressMap,
    cfg: &PipelineConfig,
) -> Result<Training<T>, PipelineError> {
    let valid = usable(&decoded, map);
    if valid.is_empty() {
        return Err(PipelineError::NoTransmissions);
    }
    let tau = estimate_tau(&valid, None)?;
    let groups: Vec<Option<SourceAddress>> = decoded.iter().map(|d| d.sa).collect();
    let partition = stratified_split(&groups, cfg.train.split, cfg.train.seed);
    let features = build_datasets(powers, &decoded, &partition, map, tau, &cfg.build)?;

    let models: Vec<TrainedModel<T>> = features
        .datasets
        .par_iter()
        .map(|ds| {
            let err = |source| PipelineError::Learn { sa: ds.sa, source };
            let report = train(ds, &cfg.train).map_err(err)?;
            let bootstrap = if cfg.bootstrap {
                Some(bootstrap_accuracy(ds, &cfg.train).map_err(err)?)
            } else {
                None
            };
            Ok(TrainedModel {
                ecu: ds.ecu,
                sa: ds.sa,
                report,
                bootstrap,
            })
        })
        .collect::<Result<_, PipelineError>>()?;

    let entries = models
        .iter()
        .map(|m| SaModel {
            sa: m.sa,
            ecu: m.ecu,
            model: m.report.model.clone(),
            basis: features.bases[m.ecu].clone(),
            stats: features.stats[m.ecu],
        })
        .collect();
    let bundle = ModelBundle::new(entries, tau, cfg.build.m, cfg.build.tukey, cfg.delta, map.clone())?;
    Ok(Training {
        bundle,
        models,
        decoded,
        partition,
        features,
    })
}

/// Verdicts over a whole simulation, matched against its ground truth.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    /// The scored transmissions, one per verdict.
    pub transmissions: Vec<DecodedTransmission>,
    pub verdicts: Vec<Verdict<T>>,
    /// Ground-truth entry of each verdict, if one started at the same time.
    pub truth: Vec<Option<GroundTruthEntry>>,
    /// Decoded transmissions that could not be scored.
    pub skipped: usize,
    pub latency: LatencyStats,
}

impl<T: Scalar> Evaluation<T> {
    /// Truth is the ground-truth attack flag, prediction is
    /// [`Decision::is_attack`](crate::auth::Decision::is_attack).
    pub fn attack_confusion(&self) -> ConfusionMatrix<TrafficClass> {
        let mut cm = ConfusionMatrix::with_labels([TrafficClass::Normal, TrafficClass::Attack]);
        for (v, g) in self.verdicts.iter().zip(&self.truth) {
            let Some(g) = g else { continue };
            let truth = if g.is_attack() {
                TrafficClass::Attack
            } else {
                TrafficClass::Normal
            };
            let pred = if v.decision.is_attack() {
                TrafficClass::Attack
            } else {
                TrafficClass::Normal
            };
            cm.add(&truth, &pred);
        }
        cm
    }

    /// Sender confusion over the frames the ground truth marks as normal.
    pub fn sender_confusion(&self, map: &SourceAddressMap) -> ConfusionMatrix<SenderLabel> {
        let normal: Vec<Verdict<T>> = self
            .verdicts
            .iter()
            .zip(&self.truth)
            .filter(|(_, g)| g.as_ref().is_some_and(|g| !g.is_attack()))
            .map(|(v, _)| v.clone())
            .collect();
        sender_confusion(&normal, map)
    }

    /// Attack frames sent by a legitimate ECU, and how many of them flagged
    /// exactly that ECU.
    pub fn flagged_correctly(&self) -> (usize, usize) {
        let mut total = 0;
        let mut correct = 0;
        for (v, g) in self.verdicts.iter().zip(&self.truth) {
            if let Some(GroundTruthEntry {
                attack: Some(_),
                true_source: Transmitter::Ecu(k),
                ..
            }) = g
            {
                total += 1;
                if v.flagged_compromised == Some(*k) {
                    correct += 1;
                }
            }
        }
        (correct, total)
    }

    /// Ground-truth matched verdicts that are attacks.
    pub fn attacks(&self) -> impl Iterator<Item = (&Verdict<T>, &GroundTruthEntry)> {
        self.verdicts
            .iter()
            .zip(&self.truth)
            .filter_map(|(v, g)| g.as_ref().filter(|g| g.is_attack()).map(|g| (v, g)))
    }
}

/// Decodes a simulation's bus voltage and authenticates every usable
/// transmission against `bundle`.
pub fn evaluate<T: Scalar>(
    sim: &Simulation<T>,
    bitrate: u32,
    bundle: &ModelBundle<T>,
) -> Result<Evaluation<T>, PipelineError> {
    evaluate_traces(&sim.voltage, &sim.powers, Some(&sim.log), bitrate, bundle)
}

/// [`evaluate`] on bare traces; without a log every truth entry is `None`.
pub fn evaluate_traces<T: Scalar>(
    voltage: &SampledTrace<T>,
    powers: &[SampledTrace<T>],
    log: Option<&GroundTruthLog>,
    bitrate: u32,
    bundle: &ModelBundle<T>,
) -> Result<Evaluation<T>, PipelineError> {
    let decoded = decode_transmissions(voltage, bitrate, &bundle.map)?;
    let transmissions = usable(&decoded, &bundle.map);
    let auth = Authenticator::new(bundle, voltage.sample_rate)?;
    let (verdicts, latency) = auth.verdicts_timed(&transmissions, powers)?;
    let half_bit = 0.5 / bitrate as f64;
    let truth = transmissions
        .iter()
        .map(|d| log.and_then(|l| l.find(d.t, half_bit)).cloned())
        .collect();
    Ok(Evaluation {
        skipped: decoded.len() - transmissions.len(),
        transmissions,
        verdicts,
        truth,
        latency,
    })
}

/// A training scenario and an optional separate evaluation scenario.
#[derive(Debug, Clone)]
pub struct Experiment<T> {
    pub train_scenario: Scenario,
    pub eval_scenario: Option<Scenario>,
    pub config: PipelineConfig,
    _scalar: std::marker::PhantomData<T>,
}

/// Output of [`Experiment::run`].
#[derive(Debug, Clone)]
pub struct ExperimentReport<T> {
    pub training: Training<T>,
    /// Sender confusion on the held-out test transmissions.
    pub test_confusion: ConfusionMatrix<SenderLabel>,
    pub test_latency: LatencyStats,
    pub evaluation: Option<Evaluation<T>>,
}

impl<T: Scalar> Experiment<T> {
    pub fn new(train_scenario: Scenario, config: PipelineConfig) -> Self {
        Self {
            train_scenario,
            eval_scenario: None,
            config,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn with_evaluation(mut self, scenario: Scenario) -> Self {
        self.eval_scenario = Some(scenario);
        self
    }

    pub fn run(&self) -> Result<ExperimentReport<T>, PipelineError> {
        let sim = simulate::<T>(&self.train_scenario)?;
        let decoded = decode_transmissions(&sim.voltage, self.train_scenario.bus.bitrate, &sim.map)?;
        let training = train_bundle(&sim.powers, decoded, &sim.map, &self.config)?;
        let (test_verdicts, test_latency) = training.test_verdicts(&sim.powers)?;
        let test_confusion = sender_confusion(&test_verdicts, &training.bundle.map);
        drop(sim);
        let evaluation = match &self.eval_scenario {
            Some(s) => {
                let sim = simulate::<T>(s)?;
                Some(evaluate(&sim, s.bus.bitrate, &training.bundle)?)
            }
            None => None,
        };
        Ok(ExperimentReport {
            training,
            test_confusion,
            test_latency,
            evaluation,
        })
    }
}
