use std::collections::BTreeSet;

use super::AuthError;
use crate::canproto::{SourceAddress, SourceAddressMap};
use crate::learn::SvmModel;
use crate::scalar::Scalar;
use crate::sigfeat::{NormStats, PcaBasis, Tau, TukeyParams};

/// Everything needed to score one source address.
#[derive(Debug, Clone, PartialEq)]
pub struct SaModel<T> {
    pub sa: SourceAddress,
    /// Owning ECU, whose power trace the model reads.
    pub ecu: usize,
    pub model: SvmModel<T>,
    pub basis: PcaBasis<T>,
    pub stats: NormStats<T>,
}

/// The trained model set `F = {f_1, …, f_K}` with its shared parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    /// Ordered by source address.
    pub entries: Vec<SaModel<T>>,
    pub tau: Tau,
    /// Features per model.
    pub m: usize,
    pub tukey: TukeyParams,
    /// Threshold on the calibrated transmission probability, in `(0, 1)`.
    pub delta: f64,
    pub map: SourceAddressMap,
}

impl<T: Scalar> ModelBundle<T> {
    /// Checks the invariants and sorts the entries.
    pub fn new(
        mut entries: Vec<SaModel<T>>,
        tau: Tau,
        m: usize,
        tukey: TukeyParams,
        delta: f64,
        map: SourceAddressMap,
    ) -> Result<Self, AuthError> {
        entries.sort_by_key(|e| e.sa);
        let b = Self {
            entries,
            tau,
            m,
            tukey,
            delta,
            map,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), AuthError> {
        let bad = |m: String| Err(AuthError::InvalidBundle(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        let ours: BTreeSet<SourceAddress> = self.entries.iter().map(|e| e.sa).collect();
        if ours.len() != self.entries.len() {
            return bad("duplicate source address".into());
        }
        let mapped: BTreeSet<SourceAddress> = self.map.source_addresses().into_iter().collect();
        if ours != mapped {
            return bad(format!("models cover {ours:?} but the map assigns {mapped:?}"));
        }
        for e in &self.entries {
            if self.map.owner(e.sa) != Some(e.ecu) {
                return bad(format!("SA {} is not owned by ECU {}", e.sa, e.ecu));
            }
            if e.model.dim() != self.m || e.basis.m() != self.m {
                return bad(format!("SA {}: model or basis is not {}-dimensional", e.sa, self.m));
            }
        }
        Ok(())
    }

    pub fn ecu_count(&self) -> usize {
        self.map.ecu_count()
    }

    pub fn entry(&self, sa: SourceAddress) -> Option<&SaModel<T>> {
        self.entries.iter().find(|e| e.sa == sa)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self, AuthError> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }
}
