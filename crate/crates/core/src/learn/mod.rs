//! Per-source-address linear SVMs with calibrated transmission
//! probabilities, learning curves and bootstrapped accuracy.

mod objective;
mod platt;
mod svm;

pub use objective::Problem;
pub use platt::{fit_platt, Platt, P_MIN};
pub use svm::{
    bootstrap_accuracy, train, BootstrapSummary, LearningCurve, SvmModel, TrainConfig, TrainMeta, TrainReport,
};

use crate::sigfeat::Partition;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("the {0:?} split holds only one class")]
    SingleClass(Partition),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}
