use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::Problem;
use super::platt::{fit_platt, Platt};
use super::LearnError;
use crate::scalar::{dot, Scalar};
use crate::sigfeat::{FeatureDataset, Partition, SplitRatios};

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Convergence threshold on the change of validation loss between epochs.
    pub epsilon: f64,
    /// Epoch cap.
    pub max_iters: usize,
    /// Regularization: `λ = 1 / (C · n_train)`.
    pub c: f64,
    pub split: SplitRatios,
    /// Bootstrap rounds.
    pub bootstrap_rounds: usize,
    pub seed: u64,
    pub batch_size: usize,
    /// Initial step size.
    pub eta0: f64,
    /// Epochs recorded after convergence to monitor the loss.
    pub tail_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 1000,
            c: 1.0,
            split: SplitRatios::default(),
            bootstrap_rounds: 100,
            seed: 0,
            batch_size: 32,
            eta0: 0.05,
            tail_epochs: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.max_iters < 2 {
            return bad("max_iters must be at least 2");
        }
        if !(self.c > 0.0) {
            return bad("C must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.eta0 > 0.0) {
            return bad("eta0 must be positive");
        }
        SplitRatios::new(self.split.train, self.split.validation, self.split.test)
            .map_err(|e| LearnError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// Losses per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    /// Regularized training objective.
    pub train_loss: Vec<f64>,
    /// Class-balanced mean hinge loss on the validation split.
    pub val_loss: Vec<f64>,
    /// Epoch at which `|Δ val_loss| < ε` first held.
    pub converged_at: Option<usize>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.val_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val_loss.is_empty()
    }

    /// Change of validation loss into epoch `i`.
    pub fn delta(&self, i: usize) -> Option<f64> {
        (i > 0 && i < self.len()).then(|| self.val_loss[i] - self.val_loss[i - 1])
    }

    /// Standard deviation of the validation loss from the convergence epoch on.
    pub fn post_convergence_std(&self) -> Option<f64> {
        let c = self.converged_at?;
        let tail = &self.val_loss[c..];
        let n = tail.len() as f64;
        let mean = tail.iter().sum::<f64>() / n;
        Some((tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
    }
}

/// Bookkeeping attached to a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    /// Epochs run, including the monitoring tail.
    pub iterations: usize,
    pub final_loss: f64,
    pub epsilon: f64,
    pub converged: bool,
}

/// Linear SVM with Platt calibration, operating on raw feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub w: Vec<T>,
    pub b: T,
    pub platt: Platt,
    pub meta: TrainMeta,
}

impl<T: Scalar> SvmModel<T> {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn margin(&self, x: &[T]) -> Result<T, LearnError> {
        if x.len() != self.w.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.w.len(),
                got: x.len(),
            });
        }
        Ok(dot(&self.w, x) + self.b)
    }

    /// `(p_non_transmission, p_transmission)`.
    pub fn predict_proba(&self, x: &[T]) -> Result<(T, T), LearnError> {
        let p = T::lit(self.platt.prob(self.margin(x)?.as_f64()));
        Ok((T::one() - p, p))
    }

    pub fn predict(&self, x: &[T]) -> Result<bool, LearnError> {
        Ok(self.margin(x)? > T::zero())
    }
}

/// Model plus its training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub model: SvmModel<T>,
    pub curve: LearningCurve,
    /// Accuracy of the model over the whole validation split.
    pub val_accuracy: f64,
}

fn balance(idx: &[usize], y: &[bool], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| y[i]);
    let k = pos.len().min(neg.len());
    pos.shuffle(rng);
    neg.shuffle(rng);
    pos.truncate(k);
    neg.truncate(k);
    let mut out = pos;
    out.extend(neg);
    out.sort_unstable();
    out
}

fn has_both(idx: &[usize], y: &[bool]) -> bool {
    idx.iter().any(|&i| y[i]) && idx.iter().any(|&i| !y[i])
}

/// Trains on the rows `train_idx` (may repeat) and calibrates / validates on
/// `val_idx`.
pub(crate) fn train_on<T: Scalar>(
    ds: &FeatureDataset<T>,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainReport<T>, LearnError> {
    cfg.validate()?;
    if !has_both(train_idx, &ds.y) {
        return Err(LearnError::SingleClass(Partition::Train));
    }
    if !has_both(val_idx, &ds.y) {
        return Err(LearnError::SingleClass(Partition::Validation));
    }
    let m = ds.m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = balance(train_idx, &ds.y, &mut rng);
    let val = balance(val_idx, &ds.y, &mut rng);

    // standardize with training statistics
    let n = train.len() as f64;
    let mut mu = vec![0.0f64; m];
    let mut sd = vec![0.0f64; m];
    for &i in &train {
        for (a, &x) in mu.iter_mut().zip(ds.row(i)) {
            *a += x.as_f64();
        }
    }
    mu.iter_mut().for_each(|a| *a /= n);
    for &i in &train {
        for ((s, &x), &u) in sd.iter_mut().zip(ds.row(i)).zip(&mu) {
            *s += (x.as_f64() - u).powi(2);
        }
    }
    sd.iter_mut().for_each(|s| {
        *s = (*s / n).sqrt();
        if !(*s > 0.0) {
            *s = 1.0;
        }
    });
    let standardize = |rows: &[usize]| -> (Vec<T>, Vec<T>) {
        let mut x = Vec::with_capacity(rows.len() * m);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend(
                ds.row(i)
                    .iter()
                    .zip(&mu)
                    .zip(&sd)
                    .map(|((&v, &u), &s)| T::lit((v.as_f64() - u) / s)),
            );
            y.push(if ds.y[i] { T::one() } else { -T::one() });
        }
        (x, y)
    };
    let (xt, yt) = standardize(&train);
    let (xv, yv) = standardize(&val);
    let pt = Problem::new(&xt, m, &yt);
    let pv = Problem::new(&xv, m, &yv);
    let all_t: Vec<usize> = (0..pt.len()).collect();
    let pos_v: Vec<usize> = (0..pv.len()).filter(|&i| yv[i] > T::zero()).collect();
    let neg_v: Vec<usize> = (0..pv.len()).filter(|&i| yv[i] < T::zero()).collect();
    let val_loss = |w: &[T], b: T| 0.5 * (pv.hinge(w, b, &pos_v).as_f64() + pv.hinge(w, b, &neg_v).as_f64());

    let lambda = 1.0 / (cfg.c * n);
    let lam = T::lit(lambda);
    let mut w = vec![T::zero(); m];
    let mut b = T::zero();
    // running average of the iterates
    let mut w_avg = w.clone();
    let mut b_avg = b;
    let mut n_avg = 0.0f64;
    let mut order = all_t.clone();
    let mut step = 0u64;
    let mut curve = LearningCurve::default();
    let mut snapshot: Option<(Vec<T>, T)> = None;
    let mut tail_left = cfg.tail_epochs;

    for epoch in 0..cfg.max_iters {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let eta = T::lit(cfg.eta0 / (1.0 + cfg.eta0 * lambda * step as f64));
            let (gw, gb) = pt.subgradient(&w, b, lam, batch);
            for (wi, gi) in w.iter_mut().zip(&gw) {
                *wi = *wi - eta * *gi;
            }
            b = b - eta * gb;
            step += 1;
            n_avg += 1.0;
            let r = T::lit(1.0 / n_avg);
            for (a, &wi) in w_avg.iter_mut().zip(&w) {
                *a = *a + (wi - *a) * r;
            }
            b_avg = b_avg + (b - b_avg) * r;
        }
        curve.train_loss.push(pt.objective(&w_avg, b_avg, lam, &all_t).as_f64());
        curve.val_loss.push(val_loss(&w_avg, b_avg));

        if curve.converged_at.is_none() {
            if let Some(d) = curve.delta(epoch) {
                if d.abs() < cfg.epsilon {
                    curve.converged_at = Some(epoch);
                    snapshot = Some((w_avg.clone(), b_avg));
                }
            }
        } else {
            tail_left = tail_left.saturating_sub(1);
        }
        if curve.converged_at.is_some() && tail_left == 0 {
            break;
        }
    }

    let converged = curve.converged_at.is_some();
    let (ws, bs) = snapshot.unwrap_or((w_avg, b_avg));
    // fold the standardization into raw-space weights
    let mut w_raw = Vec::with_capacity(m);
    let mut b_raw = bs.as_f64();
    for ((&wi, &u), &s) in ws.iter().zip(&mu).zip(&sd) {
        let v = wi.as_f64() / s;
        w_raw.push(T::lit(v));
        b_raw -= v * u;
    }
    let b_raw = T::lit(b_raw);

    let margins: Vec<f64> = val.iter().map(|&i| (dot(&w_raw, ds.row(i)) + b_raw).as_f64()).collect();
    let labels: Vec<bool> = val.iter().map(|&i| ds.y[i]).collect();
    let platt = fit_platt(&margins, &labels);

    let correct = val_idx
        .iter()
        .filter(|&&i| ((dot(&w_raw, ds.row(i)) + b_raw) > T::zero()) == ds.y[i])
        .count();
    let final_loss = curve
        .converged_at
        .map_or_else(|| *curve.val_loss.last().expect("one epoch"), |c| curve.val_loss[c]);
    Ok(TrainReport {
        model: SvmModel {
            w: w_raw,
            b: b_raw,
            platt,
            meta: TrainMeta {
                iterations: curve.len(),
                final_loss,
                epsilon: cfg.epsilon,
                converged,
            },
        },
        curve,
        val_accuracy: correct as f64 / val_idx.len() as f64,
    })
}

/// Trains the `(ECU, SA)` classifier on the dataset's training rows.
///
/// The majority class of the training and validation splits is subsampled
/// to the minority count. Optimization is seeded mini-batch subgradient
/// descent on the hinge loss with a decaying step, evaluated on the
/// averaged iterate; it stops once the validation loss changes by less than
/// `ε` between epochs (then records `tail_epochs` more for monitoring) or
/// after `max_iters` epochs, in which case `meta.converged` is false. The
/// returned weights are those at the convergence epoch. Platt calibration is
/// fitted on the balanced validation rows.
pub fn train<T: Scalar>(ds: &FeatureDataset<T>, cfg: &TrainConfig) -> Result<TrainReport<T>, LearnError> {
    let train_idx = ds.indices(Partition::Train);
    let val_idx = ds.indices(Partition::Validation);
    train_on(ds, &train_idx, &val_idx, cfg, cfg.seed)
}

/// Spread of validation accuracy over bootstrap rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub accuracies: Vec<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BootstrapSummary {
    /// Order statistics with linearly interpolated quartiles.
    pub fn from_samples(accuracies: Vec<f64>) -> Self {
        assert!(!accuracies.is_empty());
        let mut s = accuracies.clone();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (s.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        Self {
            min: s[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: s[s.len() - 1],
            accuracies,
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Retrains on `bootstrap_rounds` resamples (with replacement) of the
/// training split and reports the validation accuracy of each.
pub fn bootstrap_accuracy<T: Scalar>(
    ds: &FeatureDataset<T>,
    cfg: &TrainConfig,
) -> Result<BootstrapSummary, LearnError> {
    if cfg.bootstrap_rounds < 10 {
        return Err(LearnError::InvalidConfig(format!(
            "bootstrap needs at least 10 rounds, got {}",
            cfg.bootstrap_rounds
        )));
    }
    let train_idx = ds.indices(Partition::Train);
    let val_idx = ds.indices(Partition::Validation);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB007_5742);
    let mut acc = Vec::with_capacity(cfg.bootstrap_rounds);
    for round in 0..cfg.bootstrap_rounds {
        let resample: Vec<usize> = (0..train_idx.len())
            .map(|_| train_idx[rng.random_range(0..train_idx.len())])
            .collect();
        let r = train_on(ds, &resample, &val_idx, cfg, cfg.seed.wrapping_add(round as u64 + 1))?;
        acc.push(r.val_accuracy);
    }
    Ok(BootstrapSummary::from_samples(acc))
}
