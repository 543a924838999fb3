use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// A planned forward FFT of fixed length, shareable across threads.
#[derive(Clone)]
pub struct SpectrumPlan<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    len: usize,
}

impl<T: Scalar> std::fmt::Debug for SpectrumPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumPlan").field("len", &self.len).finish()
    }
}

impl<T: Scalar> SpectrumPlan<T> {
    pub fn new(len: usize) -> Self {
        assert!(len >= 2, "spectrum needs at least two samples");
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, len }
    }

    pub fn input_len(&self) -> usize {
        self.len
    }

    /// `floor(n/2) + 1`.
    pub fn output_len(&self) -> usize {
        self.len / 2 + 1
    }

    /// Full two-sided complex transform.
    pub fn transform(&self, segment: &[T]) -> Vec<Complex<T>> {
        assert_eq!(segment.len(), self.len, "segment length differs from the plan");
        let mut buf: Vec<Complex<T>> = segment.iter().map(|&x| Complex::new(x, T::zero())).collect();
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        buf
    }

    /// One-sided magnitude spectrum.
    pub fn magnitudes(&self, segment: &[T]) -> Vec<T> {
        let full = self.transform(segment);
        full[..self.output_len()].iter().map(|c| c.norm()).collect()
    }
}

/// One-sided DFT magnitude spectrum of `segment`, `floor(n/2) + 1` bins.
pub fn spectrum<T: Scalar>(segment: &[T]) -> Vec<T> {
    SpectrumPlan::new(segment.len()).magnitudes(segment)
}
