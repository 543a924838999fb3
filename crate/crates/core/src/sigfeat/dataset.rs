use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::norm::{estimate_norm_stats, NormStats, Tau, MIN_CALIB_LEN};
use super::pca::{fit_pca, PcaBasis};
use super::spectrum::SpectrumPlan;
use super::window::{tukey_window, TukeyParams};
use super::SigError;
use crate::canproto::{DecodedTransmission, SourceAddress, SourceAddressMap};
use crate::scalar::Scalar;
use crate::trace::SampledTrace;

/// Role of a row in training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

/// Train / validation / test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, SigError> {
        let ok = [train, validation, test].iter().all(|r| (0.0..=1.0).contains(r))
            && ((train + validation + test) - 1.0).abs() < 1e-9
            && train > 0.0
            && validation > 0.0;
        if ok {
            Ok(Self {
                train,
                validation,
                test,
            })
        } else {
            Err(SigError::InvalidParam(format!(
                "split ratios {train}:{validation}:{test} must be non-negative, sum to 1 and keep train and validation non-empty"
            )))
        }
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

/// Assigns every item a partition, separately within each group so that all
/// groups are split in the same proportions. Deterministic in `seed`.
pub fn stratified_split<K: Ord + Clone>(groups: &[K], ratios: SplitRatios, seed: u64) -> Vec<Partition> {
    let mut by_group: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        by_group.entry(g.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Partition::Train; groups.len()];
    for idx in by_group.values_mut() {
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (n * ratios.train).round() as usize;
        let n_val = ((n * ratios.validation).round() as usize).min(idx.len() - n_train.min(idx.len()));
        for (k, &i) in idx.iter().enumerate() {
            out[i] = if k < n_train {
                Partition::Train
            } else if k < n_train + n_val {
                Partition::Validation
            } else {
                Partition::Test
            };
        }
    }
    out
}

/// Labelled feature rows for one `(ECU, SA)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset<T> {
    pub ecu: usize,
    pub sa: SourceAddress,
    /// Columns per row.
    pub m: usize,
    /// Row-major `N × m`.
    pub x: Vec<T>,
    /// `true` where the row's transmission carries `sa`.
    pub y: Vec<bool>,
    pub partition: Vec<Partition>,
    /// Transmission start time of each row, seconds.
    pub times: Vec<f64>,
}

impl<T: Scalar> FeatureDataset<T> {
    pub fn from_rows(
        ecu: usize,
        sa: SourceAddress,
        rows: &[Vec<T>],
        y: Vec<bool>,
        partition: Vec<Partition>,
    ) -> Result<Self, SigError> {
        let m = rows.first().map_or(0, Vec::len);
        if y.len() != rows.len() || partition.len() != rows.len() {
            return Err(SigError::DimensionMismatch {
                expected: rows.len(),
                got: y.len().min(partition.len()),
            });
        }
        let mut x = Vec::with_capacity(rows.len() * m);
        for r in rows {
            if r.len() != m {
                return Err(SigError::DimensionMismatch {
                    expected: m,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(SigError::InvalidParam("feature rows must be finite".into()));
            }
            x.extend_from_slice(r);
        }
        Ok(Self {
            ecu,
            sa,
            m,
            x,
            times: vec![0.0; y.len()],
            y,
            partition,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.m..(i + 1) * self.m]
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    /// Row indices in `part`, ascending.
    pub fn indices(&self, part: Partition) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.partition[i] == part).collect()
    }
}

/// Normalize, slice, window and transform segments of one ECU's trace.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T: Scalar> {
    pub stats: NormStats<T>,
    pub tau: Tau,
    seg_len: usize,
    window: Vec<T>,
    plan: SpectrumPlan<T>,
}

impl<T: Scalar> FeatureExtractor<T> {
    pub fn new(stats: NormStats<T>, tau: Tau, sample_rate: f64, win: TukeyParams) -> Result<Self, SigError> {
        let seg_len = tau.samples(sample_rate);
        if seg_len < 2 {
            return Err(SigError::InvalidParam(format!(
                "tau of {} s spans fewer than two samples",
                tau.seconds()
            )));
        }
        Ok(Self {
            stats,
            tau,
            seg_len,
            window: tukey_window(seg_len, win),
            plan: SpectrumPlan::new(seg_len),
        })
    }

    /// Samples per segment.
    pub fn segment_len(&self) -> usize {
        self.seg_len
    }

    /// Spectrum bins per segment.
    pub fn spectrum_len(&self) -> usize {
        self.plan.output_len()
    }

    /// Windowed, normalized segment starting at `t`.
    pub fn segment(&self, trace: &SampledTrace<T>, t: f64) -> Result<Vec<T>, SigError> {
        let start = trace.index_at(t);
        if start < 0 || start as usize + self.seg_len > trace.len() {
            return Err(SigError::OutOfBounds {
                t,
                tau: self.tau.seconds(),
            });
        }
        let start = start as usize;
        Ok(trace.samples[start..start + self.seg_len]
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| self.stats.apply(x) * w)
            .collect())
    }

    pub fn spectrum_at(&self, trace: &SampledTrace<T>, t: f64) -> Result<Vec<T>, SigError> {
        Ok(self.plan.magnitudes(&self.segment(trace, t)?))
    }

    /// The `M` PCA coordinates of the segment at `t`.
    pub fn feature_at(&self, trace: &SampledTrace<T>, t: f64, basis: &PcaBasis<T>) -> Result<Vec<T>, SigError> {
        basis.project(&self.spectrum_at(trace, t)?)
    }
}

/// One feature vector: normalize, slice `[t, t + τ)`, window, FFT magnitude,
/// project onto `basis`.
pub fn extract_feature<T: Scalar>(
    trace: &SampledTrace<T>,
    stats: NormStats<T>,
    t: f64,
    tau: Tau,
    win: TukeyParams,
    basis: &PcaBasis<T>,
) -> Result<Vec<T>, SigError> {
    FeatureExtractor::new(stats, tau, trace.sample_rate, win)?.feature_at(trace, t, basis)
}

/// Knobs of [`build_datasets`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    /// Principal components kept.
    pub m: usize,
    pub tukey: TukeyParams,
    /// Calibration prefix for [`NormStats`], clamped to the trace length.
    pub calib_len: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            m: 50,
            tukey: TukeyParams::default(),
            calib_len: 200_000,
        }
    }
}

/// Everything [`build_datasets`] learnt, besides the datasets themselves.
#[derive(Debug, Clone)]
pub struct FeatureSet<T> {
    pub tau: Tau,
    pub tukey: TukeyParams,
    /// One dataset per `(ECU, SA)`, ordered by ECU then SA.
    pub datasets: Vec<FeatureDataset<T>>,
    /// PCA basis per ECU index.
    pub bases: Vec<PcaBasis<T>>,
    /// Normalization per ECU index.
    pub stats: Vec<NormStats<T>>,
    /// Indices into the input transmissions that became rows.
    pub rows: Vec<usize>,
}

/// Normalization, basis and projected rows of one ECU.
type EcuFit<T> = (NormStats<T>, PcaBasis<T>, Vec<T>);

/// Builds one labelled dataset per `(ECU, SA)`.
///
/// Rows are the CRC-valid transmissions whose SA has an owner. Each ECU's
/// PCA basis is fitted on its spectra of the transmissions marked
/// [`Partition::Train`]; all rows are then projected onto it. Row labels of
/// `(E_k, S)` are `true` exactly for transmissions claiming `S`.
pub fn build_datasets<T: Scalar>(
    powers: &[SampledTrace<T>],
    transmissions: &[DecodedTransmission],
    partition: &[Partition],
    map: &SourceAddressMap,
    tau: Tau,
    cfg: &BuildConfig,
) -> Result<FeatureSet<T>, SigError> {
    if partition.len() != transmissions.len() {
        return Err(SigError::DimensionMismatch {
            expected: transmissions.len(),
            got: partition.len(),
        });
    }
    let rows: Vec<usize> = (0..transmissions.len())
        .filter(|&i| {
            let d = &transmissions[i];
            d.crc_ok && d.sa.is_some_and(|sa| map.owner(sa).is_some())
        })
        .collect();
    if rows.is_empty() {
        return Err(SigError::EmptyInput);
    }
    let n_ecus = map.ecu_count();
    if powers.len() < n_ecus {
        return Err(SigError::DimensionMismatch {
            expected: n_ecus,
            got: powers.len(),
        });
    }

    let per_ecu: Vec<Result<EcuFit<T>, SigError>> = (0..n_ecus)
        .into_par_iter()
        .map(|k| {
            let trace = &powers[k];
            let calib = cfg.calib_len.min(trace.len()).max(MIN_CALIB_LEN);
            let stats = estimate_norm_stats(trace, calib)?;
            let fx = FeatureExtractor::new(stats, tau, trace.sample_rate, cfg.tukey)?;
            let spectra = rows
                .iter()
                .map(|&i| fx.spectrum_at(trace, transmissions[i].t))
                .collect::<Result<Vec<_>, _>>()?;
            let train: Vec<Vec<T>> = rows
                .iter()
                .zip(&spectra)
                .filter(|(&i, _)| partition[i] == Partition::Train)
                .map(|(_, s)| s.clone())
                .collect();
            let basis = fit_pca(&train, cfg.m)?;
            let mut x = Vec::with_capacity(rows.len() * cfg.m);
            for s in &spectra {
                x.extend(basis.project(s)?);
            }
            Ok((stats, basis, x))
        })
        .collect();

    let mut stats = Vec::with_capacity(n_ecus);
    let mut bases = Vec::with_capacity(n_ecus);
    let mut datasets = Vec::new();
    let times: Vec<f64> = rows.iter().map(|&i| transmissions[i].t).collect();
    let parts: Vec<Partition> = rows.iter().map(|&i| partition[i]).collect();
    for (k, r) in per_ecu.into_iter().enumerate() {
        let (st, basis, x) = r?;
        for sa in map.addresses_of(k) {
            datasets.push(FeatureDataset {
                ecu: k,
                sa,
                m: cfg.m,
                x: x.clone(),
                y: rows.iter().map(|&i| transmissions[i].sa == Some(sa)).collect(),
                partition: parts.clone(),
                times: times.clone(),
            });
        }
        stats.push(st);
        bases.push(basis);
    }
    Ok(FeatureSet {
        tau,
        tukey: cfg.tukey,
        datasets,
        bases,
        stats,
        rows,
    })
}
