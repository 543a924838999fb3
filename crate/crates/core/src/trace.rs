use crate::scalar::Scalar;

/// Uniformly sampled real-valued signal: bus differential voltage or an
/// ECU's supply power.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace<T> {
    pub samples: Vec<T>,
    /// Hz, strictly positive.
    pub sample_rate: f64,
    /// Time of the first sample, seconds.
    pub start_time: f64,
}

impl<T: Scalar> SampledTrace<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64, start_time: f64) -> Self {
        assert!(sample_rate > 0.0, "sample rate must be positive");
        Self {
            samples,
            sample_rate,
            start_time,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Covered time span, seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Index of the sample at or after `t`.
    pub fn index_at(&self, t: f64) -> isize {
        ((t - self.start_time) * self.sample_rate - 1e-6).ceil() as isize
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Converts the sample type.
    pub fn cast<U: Scalar>(&self) -> SampledTrace<U> {
        SampledTrace {
            samples: self.samples.iter().map(|&x| U::lit(x.as_f64())).collect(),
            sample_rate: self.sample_rate,
            start_time: self.start_time,
        }
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&x| x * c).collect(),
            sample_rate: self.sample_rate,
            start_time: self.start_time,
        }
    }
}
