use super::bits::BitSequence;
use super::frame::{serialize_frame, CanFrame, INTERFRAME_BITS};
use super::ProtoError;

/// A frame that won the bus, with its position on the bit-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTransmission {
    /// Index into the request slice handed to [`arbitrate`].
    pub request: usize,
    pub frame: CanFrame,
    pub request_time: f64,
    /// SOF position in bit times since t = 0.
    pub start_bit: u64,
    pub bits: BitSequence,
}

impl ScheduledTransmission {
    /// First bit time after EOF.
    pub fn end_bit(&self) -> u64 {
        self.start_bit + self.bits.len() as u64
    }
}

/// Converts a request time to the first bit boundary at or after it.
pub fn bit_tick(time: f64, bitrate: u32) -> u64 {
    let t = (time * bitrate as f64 - 1e-9).ceil();
    if t <= 0.0 {
        0
    } else {
        t as u64
    }
}

/// Resolves bus access for a set of transmission requests.
///
/// Whenever the bus goes idle, all requests issued so far contend and the
/// lowest arbitration field wins; losers retry at the next idle point,
/// `INTERFRAME_BITS` after the winner's EOF. Two contenders with the same
/// identifier are a [`ProtoError::DuplicateId`].
pub fn arbitrate(requests: &[(CanFrame, f64)], bitrate: u32) -> Result<Vec<ScheduledTransmission>, ProtoError> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    let ticks: Vec<u64> = requests.iter().map(|(_, t)| bit_tick(*t, bitrate)).collect();
    order.sort_by_key(|&i| (ticks[i], i));

    let keys: Vec<Vec<bool>> = requests.iter().map(|(f, _)| f.arbitration_bits()).collect();
    let mut pending: Vec<usize> = Vec::new();
    let mut next = 0usize;
    let mut now = 0u64;
    let mut out = Vec::with_capacity(requests.len());

    while next < order.len() || !pending.is_empty() {
        if pending.is_empty() {
            now = now.max(ticks[order[next]]);
        }
        while next < order.len() && ticks[order[next]] <= now {
            pending.push(order[next]);
            next += 1;
        }
        let (slot, &winner) = pending
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| keys[a].cmp(&keys[b]).then(a.cmp(&b)))
            .expect("pending is non-empty");
        if pending.iter().any(|&o| o != winner && keys[o] == keys[winner]) {
            return Err(ProtoError::DuplicateId {
                id: requests[winner].0.id(),
            });
        }
        pending.swap_remove(slot);
        let (frame, request_time) = &requests[winner];
        let bits = serialize_frame(frame);
        let len = bits.len() as u64;
        out.push(ScheduledTransmission {
            request: winner,
            frame: frame.clone(),
            request_time: *request_time,
            start_bit: now,
            bits,
        });
        now += len + INTERFRAME_BITS;
    }
    Ok(out)
}
