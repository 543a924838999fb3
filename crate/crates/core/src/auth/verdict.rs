use std::time::{Duration, Instant};

use super::{AuthError, ModelBundle};
use crate::canproto::{DecodedTransmission, SourceAddress};
use crate::scalar::Scalar;
use crate::sigfeat::FeatureExtractor;
use crate::trace::SampledTrace;

/// Probabilities closer than this count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Exp-normalizes `v`, shifting by its maximum first.
pub fn softmax<T: Scalar>(v: &[T]) -> Vec<T> {
    assert!(!v.is_empty(), "softmax of an empty vector");
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: T = e.iter().copied().sum();
    e.into_iter().map(|x| x / sum).collect()
}

/// Scores of every model for one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution<T> {
    pub t: f64,
    pub claimed_sa: SourceAddress,
    /// Owner of the claimed SA (the purported sender `E_P`).
    pub purported_ecu: usize,
    /// Source addresses in bundle order.
    pub sas: Vec<SourceAddress>,
    /// Calibrated transmission probability per SA.
    pub p_tx: Vec<T>,
    /// Softmax of `p_tx`.
    pub softmax: Vec<T>,
    /// The SA with the highest probability, if that probability exceeds δ.
    pub winner: Option<SourceAddress>,
    /// Several SAs shared the highest probability; the lowest SA was taken.
    pub tie: bool,
}

impl<T: Scalar> Attribution<T> {
    /// Probability of the model for `sa`.
    pub fn p(&self, sa: SourceAddress) -> Option<T> {
        self.sas.iter().position(|&s| s == sa).map(|i| self.p_tx[i])
    }
}

/// Outcome of attack detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// The owner of the claimed SA transmitted.
    Authentic,
    /// Another legitimate ECU transmitted, under one of its own SAs' models.
    Impersonation { ecu: usize, sa: SourceAddress },
    /// No legitimate ECU transmitted.
    AddedModule,
}

impl Decision {
    pub fn is_attack(&self) -> bool {
        !matches!(self, Decision::Authentic)
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Authentic => f.write_str("authentic"),
            Decision::Impersonation { ecu, sa } => write!(f, "impersonation(ecu{ecu},sa{sa})"),
            Decision::AddedModule => f.write_str("added_module"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<T> {
    pub attribution: Attribution<T>,
    pub decision: Decision,
    /// ECU reported as compromised.
    pub flagged_compromised: Option<usize>,
    /// More than one model outside the purported sender exceeded δ.
    pub multiple_positive: bool,
}

impl<T: Scalar> Verdict<T> {
    pub fn t(&self) -> f64 {
        self.attribution.t
    }

    pub fn claimed_sa(&self) -> SourceAddress {
        self.attribution.claimed_sa
    }

    pub fn winner(&self) -> Option<SourceAddress> {
        self.attribution.winner
    }
}

/// Classifies an attribution.
///
/// (a) If the winning model belongs to the purported sender the frame is
/// authentic; a sibling SA of the same ECU winning counts as well.
/// (b) Otherwise the models of the other ECUs are visited in ascending ECU
/// order and the first with `p_tx > δ` names the true sender, which is
/// flagged as compromised.
/// (c) If no model exceeds δ, no legitimate ECU sent the frame.
pub fn detect_attack<T: Scalar>(attribution: Attribution<T>, bundle: &ModelBundle<T>) -> Verdict<T> {
    let delta = T::lit(bundle.delta);
    let owner_of = |sa: SourceAddress| bundle.entry(sa).map(|e| e.ecu);
    if let Some(w) = attribution.winner {
        if owner_of(w) == Some(attribution.purported_ecu) {
            return Verdict {
                attribution,
                decision: Decision::Authentic,
                flagged_compromised: None,
                multiple_positive: false,
            };
        }
    }
    let mut positives: Vec<(usize, SourceAddress)> = bundle
        .entries
        .iter()
        .zip(&attribution.p_tx)
        .filter(|(e, &p)| e.ecu != attribution.purported_ecu && p > delta)
        .map(|(e, _)| (e.ecu, e.sa))
        .collect();
    positives.sort_unstable();
    match positives.first() {
        Some(&(ecu, sa)) => Verdict {
            multiple_positive: positives.len() > 1,
            attribution,
            decision: Decision::Impersonation { ecu, sa },
            flagged_compromised: Some(ecu),
        },
        None => Verdict {
            attribution,
            decision: Decision::AddedModule,
            flagged_compromised: None,
            multiple_positive: false,
        },
    }
}

/// A bundle prepared for repeated attribution: one feature extractor per
/// ECU, reused across transmissions.
#[derive(Debug)]
pub struct Authenticator<'a, T: Scalar> {
    bundle: &'a ModelBundle<T>,
    extractors: Vec<Option<FeatureExtractor<T>>>,
}

impl<'a, T: Scalar> Authenticator<'a, T> {
    pub fn new(bundle: &'a ModelBundle<T>, sample_rate: f64) -> Result<Self, AuthError> {
        bundle.validate()?;
        let mut extractors = vec![None; bundle.ecu_count()];
        for e in &bundle.entries {
            if extractors[e.ecu].is_none() {
                extractors[e.ecu] = Some(FeatureExtractor::new(e.stats, bundle.tau, sample_rate, bundle.tukey)?);
            }
        }
        Ok(Self { bundle, extractors })
    }

    pub fn bundle(&self) -> &ModelBundle<T> {
        self.bundle
    }

    /// Scores `tx` with every model and applies the δ rule.
    pub fn attribution(
        &self,
        tx: &DecodedTransmission,
        powers: &[SampledTrace<T>],
    ) -> Result<Attribution<T>, AuthError> {
        let b = self.bundle;
        if powers.len() < self.extractors.len() {
            return Err(AuthError::BundleMismatch {
                expected: self.extractors.len(),
                got: powers.len(),
            });
        }
        let claimed = tx.sa.ok_or(AuthError::UnknownSourceAddress)?;
        let purported_ecu = b.entry(claimed).ok_or(AuthError::UnknownSourceAddress)?.ecu;

        let mut spectra: Vec<Option<Vec<T>>> = vec![None; self.extractors.len()];
        let mut p_tx = Vec::with_capacity(b.entries.len());
        for e in &b.entries {
            if spectra[e.ecu].is_none() {
                let fx = self.extractors[e.ecu].as_ref().expect("extractor per modelled ECU");
                spectra[e.ecu] = Some(fx.spectrum_at(&powers[e.ecu], tx.t)?);
            }
            let feature = e.basis.project(spectra[e.ecu].as_ref().expect("spectrum computed"))?;
            p_tx.push(e.model.predict_proba(&feature)?.1);
        }

        let max = p_tx.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = T::lit(TIE_TOLERANCE);
        let tied: Vec<usize> = (0..p_tx.len()).filter(|&i| max - p_tx[i] <= tol).collect();
        let best = tied[0];
        let winner = (p_tx[best] > T::lit(b.delta)).then_some(b.entries[best].sa);
        Ok(Attribution {
            t: tx.t,
            claimed_sa: claimed,
            purported_ecu,
            sas: b.entries.iter().map(|e| e.sa).collect(),
            softmax: softmax(&p_tx),
            p_tx,
            winner,
            tie: tied.len() > 1,
        })
    }

    pub fn verdict(&self, tx: &DecodedTransmission, powers: &[SampledTrace<T>]) -> Result<Verdict<T>, AuthError> {
        Ok(detect_attack(self.attribution(tx, powers)?, self.bundle))
    }

    /// Verdicts for every transmission with the time each took.
    pub fn verdicts_timed(
        &self,
        txs: &[DecodedTransmission],
        powers: &[SampledTrace<T>],
    ) -> Result<(Vec<Verdict<T>>, LatencyStats), AuthError> {
        let mut out = Vec::with_capacity(txs.len());
        let mut lat = LatencyStats::default();
        for tx in txs {
            let start = Instant::now();
            let v = self.verdict(tx, powers)?;
            lat.record(start.elapsed());
            out.push(v);
        }
        Ok((out, lat))
    }
}

/// Attributes one transmission and classifies it.
pub fn attribute<T: Scalar>(
    tx: &DecodedTransmission,
    powers: &[SampledTrace<T>],
    bundle: &ModelBundle<T>,
) -> Result<Verdict<T>, AuthError> {
    let rate = powers.first().map_or(1.0, |p| p.sample_rate);
    Authenticator::new(bundle, rate)?.verdict(tx, powers)
}

/// Wall-clock time per attributed transmission.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyStats {
    pub count: usize,
    pub total: Duration,
    pub max: Duration,
}

impl LatencyStats {
    pub fn record(&mut self, d: Duration) {
        self.count += 1;
        self.total += d;
        self.max = self.max.max(d);
    }

    pub fn mean(&self) -> Duration {
        if self.count == 0 {
            Duration::ZERO
        } else {
            self.total / self.count as u32
        }
    }

    pub fn merge(&mut self, other: &LatencyStats) {
        self.count += other.count;
        self.total += other.total;
        self.max = self.max.max(other.max);
    }
}
