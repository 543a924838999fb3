//! Sender attribution and attack classification.
//!
//! Every per-SA model scores the power segment of its ECU at the start of a
//! decoded transmission. The calibrated transmission probabilities are fused
//! by softmax and thresholded at δ to pick the sender; comparing that sender
//! with the owner of the claimed source address yields the verdict.

mod bundle;
mod verdict;

pub use bundle::{ModelBundle, SaModel};
pub use verdict::{
    attribute, detect_attack, softmax, Attribution, Authenticator, Decision, LatencyStats, Verdict, TIE_TOLERANCE,
};

use crate::learn::LearnError;
use crate::sigfeat::SigError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuthError {
    #[error("transmission carries no source address known to the bundle")]
    UnknownSourceAddress,
    #[error("invalid model bundle: {0}")]
    InvalidBundle(String),
    #[error("bundle expects {expected} power channels, got {got}")]
    BundleMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Feature(#[from] SigError),
    #[error(transparent)]
    Model(#[from] LearnError),
}
