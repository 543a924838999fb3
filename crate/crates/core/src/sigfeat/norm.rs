use super::SigError;
use crate::canproto::DecodedTransmission;
use crate::scalar::Scalar;
use crate::trace::SampledTrace;

/// Smallest calibration prefix accepted by [`estimate_norm_stats`].
pub const MIN_CALIB_LEN: usize = 1000;

/// Mean and standard deviation of one ECU's power trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats<T> {
    pub mean: T,
    /// Strictly positive.
    pub std: T,
}

impl<T: Scalar> NormStats<T> {
    #[inline]
    pub fn apply(&self, x: T) -> T {
        (x - self.mean) / self.std
    }
}

/// Sample mean and unbiased standard deviation of the first `calib_len`
/// samples.
pub fn estimate_norm_stats<T: Scalar>(trace: &SampledTrace<T>, calib_len: usize) -> Result<NormStats<T>, SigError> {
    if calib_len < MIN_CALIB_LEN {
        return Err(SigError::InvalidParam(format!(
            "calibration prefix of {calib_len} samples is shorter than {MIN_CALIB_LEN}"
        )));
    }
    if calib_len > trace.len() {
        return Err(SigError::InvalidParam(format!(
            "calibration prefix of {calib_len} samples exceeds the trace ({} samples)",
            trace.len()
        )));
    }
    let xs = &trace.samples[..calib_len];
    let n = calib_len as f64;
    let mean = xs.iter().map(|x| x.as_f64()).sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x.as_f64() - mean).powi(2)).sum::<f64>();
    let std = (ss / (n - 1.0)).sqrt();
    if !(std > 0.0) {
        return Err(SigError::DegenerateTrace);
    }
    Ok(NormStats {
        mean: T::lit(mean),
        std: T::lit(std),
    })
}

/// Transmission window length.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tau(f64);

impl Tau {
    pub fn new(seconds: f64) -> Result<Self, SigError> {
        if seconds > 0.0 && seconds.is_finite() {
            Ok(Self(seconds))
        } else {
            Err(SigError::InvalidParam(format!("tau must be positive, got {seconds}")))
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    /// Fixed slice length at `sample_rate`.
    pub fn samples(self, sample_rate: f64) -> usize {
        (self.0 * sample_rate).round() as usize
    }
}

/// Mean duration of the first `first_n` transmissions (all when `None`).
pub fn estimate_tau(transmissions: &[DecodedTransmission], first_n: Option<usize>) -> Result<Tau, SigError> {
    let n = first_n.map_or(transmissions.len(), |k| k.min(transmissions.len()));
    if n == 0 {
        return Err(SigError::EmptyInput);
    }
    let total: f64 = transmissions[..n].iter().map(|d| d.duration).sum();
    Tau::new(total / n as f64)
}
