//! Sender authentication for CAN buses from per-ECU power side-channel
//! measurements.
//!
//! The crate is organised as the processing chain it implements:
//!
//! * [`canproto`]: frame model, bit stuffing, CRC-15, arbitration and
//!   decoding of the bus voltage into `(t, S)` transmissions,
//! * [`bussim`]: a seeded multi-ECU bus simulator producing the voltage trace,
//!   one power trace per ECU and a ground-truth log, with attack injection,
//! * [`sigfeat`]: normalization, transmission window estimation, Tukey
//!   windowing, FFT magnitude and PCA projection into per-(ECU, SA) datasets,
//! * [`learn`]: per-source-address linear SVMs with Platt calibration,
//!   learning curves and bootstrapped accuracy,
//! * [`auth`]: softmax fusion, sender attribution and attack classification,
//! * [`evalkit`]: confusion matrices, metrics, Welch separability and the
//!   bus-configuration factor sweep,
//! * [`pipeline`]: the chain run end to end.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod auth;
pub mod bussim;
pub mod canproto;
pub mod evalkit;
pub mod learn;
pub mod pipeline;
pub mod scalar;
pub mod sigfeat;
pub mod trace;

pub use scalar::Scalar;
pub use trace::SampledTrace;

pub type Trace = trace::SampledTrace<f64>;
pub type Trace32 = trace::SampledTrace<f32>;
pub type NormStats = sigfeat::NormStats<f64>;
pub type PcaBasis = sigfeat::PcaBasis<f64>;
pub type FeatureDataset = sigfeat::FeatureDataset<f64>;
pub type SvmModel = learn::SvmModel<f64>;
pub type ModelBundle = auth::ModelBundle<f64>;
pub type Verdict = auth::Verdict<f64>;
pub type Experiment = pipeline::Experiment<f64>;
