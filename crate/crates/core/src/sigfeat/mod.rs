//! Feature extraction from per-ECU power traces.
//!
//! Each decoded transmission `(t, S)` selects a τ-long slice of every ECU's
//! z-scored power trace. The slice is Tukey-windowed, turned into an FFT
//! magnitude spectrum and projected onto the first `M` principal components
//! of that ECU's training spectra. [`build_datasets`] runs this for every
//! transmission and labels the rows per source address.

mod dataset;
mod eigen;
mod norm;
mod pca;
mod spectrum;
mod window;

pub use dataset::{
    build_datasets, extract_feature, stratified_split, BuildConfig, FeatureDataset, FeatureExtractor, FeatureSet,
    Partition, SplitRatios,
};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use norm::{estimate_norm_stats, estimate_tau, NormStats, Tau, MIN_CALIB_LEN};
pub use pca::{covariance, fit_pca, PcaBasis};
pub use spectrum::{spectrum, SpectrumPlan};
pub use window::{tukey_window, TukeyParams};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SigError {
    #[error("trace has zero variance over the calibration prefix")]
    DegenerateTrace,
    #[error("no transmissions to estimate from")]
    EmptyInput,
    #[error("window [{t}, {t} + {tau}] s lies outside the trace")]
    OutOfBounds { t: f64, tau: f64 },
    #[error("only {available} of {requested} requested principal directions carry variance")]
    RankDeficient { requested: usize, available: usize },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}
