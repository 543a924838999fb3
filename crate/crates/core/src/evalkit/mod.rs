//! Evaluation artifacts: confusion matrices, precision/recall/F-measure,
//! Welch separability of feature populations and the factor sweep over bus
//! speed, identifier format and program activity.

mod confusion;
mod metrics;
mod stats;
mod sweep;

pub use confusion::{confusion, ConfusionMatrix};
pub use metrics::{metrics, LabelMetrics, MetricReport};
pub use stats::{
    ln_gamma, regularized_beta, separability, separability_report, student_t_two_sided, welch_t, SeparabilityEntry,
    SeparabilityReport, WelchTest,
};
pub use sweep::{factor_sweep, CellKey, FactorCell, FactorGrid, SweepSpec};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{truth} truth labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("need at least two samples per population, got {a} and {b}")]
    TooFewSamples { a: usize, b: usize },
    #[error("both populations are constant and equal")]
    ZeroVariance,
}
