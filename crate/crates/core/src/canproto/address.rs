use std::collections::BTreeMap;
use std::fmt;

use super::frame::FrameFormat;
use super::ProtoError;

/// Sender identity carried in a frame identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceAddress(pub u8);

impl fmt::Display for SourceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a source address is recovered from a frame identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaDerivation {
    /// Low byte of 29-bit identifiers (J1939 layout); 11-bit identifiers
    /// still go through the explicit table.
    LowByteOfId,
    /// Only identifiers listed in the table carry a known source address.
    ExplicitTable,
}

/// Identifier → source address → ECU index.
///
/// Every source address belongs to exactly one ECU; an ECU may own several.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceAddressMap {
    derivation: SaDerivation,
    table: BTreeMap<(FrameFormat, u32), SourceAddress>,
    owners: BTreeMap<SourceAddress, usize>,
}

impl SourceAddressMap {
    pub fn new(derivation: SaDerivation) -> Self {
        Self {
            derivation,
            table: BTreeMap::new(),
            owners: BTreeMap::new(),
        }
    }

    /// Declares that `sa` belongs to ECU `ecu`.
    pub fn assign(&mut self, sa: SourceAddress, ecu: usize) -> Result<(), ProtoError> {
        match self.owners.get(&sa) {
            Some(&owner) if owner != ecu => Err(ProtoError::ConflictingOwner {
                sa: sa.0,
                owner,
                other: ecu,
            }),
            _ => {
                self.owners.insert(sa, ecu);
                Ok(())
            }
        }
    }

    /// Adds an explicit identifier entry. The source address must already be
    /// assigned to an ECU.
    pub fn insert_id(&mut self, format: FrameFormat, id: u32, sa: SourceAddress) -> Result<(), ProtoError> {
        if !self.owners.contains_key(&sa) {
            return Err(ProtoError::UnknownSourceAddress(sa.0));
        }
        if let Some(&prev) = self.table.get(&(format, id)) {
            if prev != sa {
                return Err(ProtoError::ConflictingId { id, format });
            }
        }
        self.table.insert((format, id), sa);
        Ok(())
    }

    pub fn derivation(&self) -> SaDerivation {
        self.derivation
    }

    pub fn source_address(&self, format: FrameFormat, id: u32) -> Option<SourceAddress> {
        if let Some(&sa) = self.table.get(&(format, id)) {
            return Some(sa);
        }
        match (self.derivation, format) {
            (SaDerivation::LowByteOfId, FrameFormat::Extended) => Some(SourceAddress((id & 0xFF) as u8)),
            _ => None,
        }
    }

    pub fn owner(&self, sa: SourceAddress) -> Option<usize> {
        self.owners.get(&sa).copied()
    }

    /// Source addresses in ascending order with their owning ECU.
    pub fn owners(&self) -> impl Iterator<Item = (SourceAddress, usize)> + '_ {
        self.owners.iter().map(|(&sa, &ecu)| (sa, ecu))
    }

    pub fn explicit_entries(&self) -> impl Iterator<Item = (FrameFormat, u32, SourceAddress)> + '_ {
        self.table.iter().map(|(&(f, id), &sa)| (f, id, sa))
    }

    pub fn source_addresses(&self) -> Vec<SourceAddress> {
        self.owners.keys().copied().collect()
    }

    pub fn addresses_of(&self, ecu: usize) -> Vec<SourceAddress> {
        self.owners
            .iter()
            .filter(|(_, &e)| e == ecu)
            .map(|(&sa, _)| sa)
            .collect()
    }

    /// Number of ECUs, taken as one past the largest owner index.
    pub fn ecu_count(&self) -> usize {
        self.owners.values().max().map_or(0, |m| m + 1)
    }
}
