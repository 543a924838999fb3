use super::SigError;
use crate::scalar::Scalar;

/// Tukey (tapered cosine) window shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TukeyParams {
    /// Fraction of the window inside the cosine tapers, in `[0, 1]`.
    pub alpha: f64,
}

impl TukeyParams {
    pub fn new(alpha: f64) -> Result<Self, SigError> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self { alpha })
        } else {
            Err(SigError::InvalidParam(format!("Tukey alpha {alpha} outside [0, 1]")))
        }
    }
}

impl Default for TukeyParams {
    fn default() -> Self {
        Self { alpha: 0.25 }
    }
}

/// Tukey window coefficients.
///
/// `alpha = 0` is rectangular and `alpha = 1` is the Hann window. For any
/// `alpha > 0` both endpoints are exactly zero.
pub fn tukey_window<T: Scalar>(length: usize, params: TukeyParams) -> Vec<T> {
    assert!(length >= 2, "window length must be at least 2");
    let a = params.alpha;
    let last = (length - 1) as f64;
    let mut w = vec![T::one(); length];
    if a <= 0.0 {
        return w;
    }
    // fill the rising half and mirror it so the window is exactly symmetric
    for n in 0..length.div_ceil(2) {
        let x = n as f64 / last;
        let v = if x < a / 2.0 {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * x / a).cos())
        } else {
            1.0
        };
        w[n] = T::lit(v);
        w[length - 1 - n] = T::lit(v);
    }
    w
}
