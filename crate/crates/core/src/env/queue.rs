//! FIFO task queues and the per-slot processing recursions.
//!
//! Bits are integral. A processor running at `f` cycles/s with density `c`
//! cycles/bit clears at most `floor(f·tau/c)` bits per slot; whether a queue
//! drains inside the slot is decided on those integer counts, and times and
//! energies are then evaluated in `f64`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskQueue {
    /// Unprocessed bits observed at the end of the previous slot.
    pub carried_bits: u64,
    /// Bits produced during the previous slot, queued behind `carried_bits`.
    pub fresh_bits: u64,
}

impl TaskQueue {
    pub fn total(&self) -> u64 {
        self.carried_bits + self.fresh_bits
    }

    /// Removes up to `bits` from the head of the queue, carried bits first.
    /// Returns the number removed.
    pub fn drain_front(&mut self, bits: u64) -> u64 {
        let from_carried = bits.min(self.carried_bits);
        self.carried_bits -= from_carried;
        let from_fresh = (bits - from_carried).min(self.fresh_bits);
        self.fresh_bits -= from_fresh;
        from_carried + from_fresh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Processor {
    pub freq_hz: f64,
    /// Effective switched capacitance.
    pub kappa: f64,
}

impl Processor {
    /// Bits this processor clears in a full slot.
    pub fn capacity_bits(&self, cycles_per_bit: f64, tau: f64) -> u64 {
        (self.freq_hz * tau / cycles_per_bit).floor() as u64
    }

    pub fn energy(&self, busy_s: f64) -> f64 {
        self.kappa * self.freq_hz.powi(3) * busy_s
    }

    fn time_for(&self, bits: u64, cycles_per_bit: f64) -> f64 {
        cycles_per_bit * bits as f64 / self.freq_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOutcome {
    pub t_cp: f64,
    pub queue: TaskQueue,
    pub energy: f64,
    pub processed_bits: u64,
}

/// One slot of local processing of `D + L` buffered bits.
///
/// The returned queue holds the leftover in `carried_bits` and an empty
/// `fresh_bits`; the caller injects the next slot's production.
pub fn local_process_step(queue: TaskQueue, cpu: Processor, cycles_per_bit: f64, tau: f64) -> LocalOutcome {
    let total = queue.total();
    let capacity = cpu.capacity_bits(cycles_per_bit, tau);
    let (t_cp, left) = if total <= capacity {
        (cpu.time_for(total, cycles_per_bit), 0)
    } else {
        (tau, total - capacity)
    };
    LocalOutcome {
        t_cp,
        queue: TaskQueue {
            carried_bits: left,
            fresh_bits: 0,
        },
        energy: cpu.energy(t_cp),
        processed_bits: total - left,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerCharge {
    pub ue: usize,
    /// Time from slot start until this UE's bits are done, capped at `tau`.
    pub t_cp: f64,
    /// Energy for the busy time newly consumed on behalf of this UE.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerOutcome {
    pub charges: Vec<ServerCharge>,
    pub backlog_bits: u64,
    pub processed_bits: u64,
}

/// One slot at an edge server: the carried backlog first, then each arrival
/// in ascending UE order, all sharing the slot's time budget.
///
/// With a single arrival this is exactly the single-user recursion: `t_pre =
/// D c/f`; if everything fits, `t_cp = t_pre + L c/f`, otherwise `t_cp = tau`.
/// The first arrival is charged `kappa f^3 t_cp` and every later arrival only
/// the busy time added after its predecessor, so no CPU second is billed twice.
pub fn server_process_step(
    carried_bits: u64,
    arrivals: &[(usize, u64)],
    cpu: Processor,
    cycles_per_bit: f64,
    tau: f64,
) -> Result<ServerOutcome> {
    if arrivals.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Contract("server arrivals must be sorted by strictly ascending UE index".into()));
    }
    let capacity = cpu.capacity_bits(cycles_per_bit, tau);
    let mut cumulative = carried_bits;
    let mut saturated = carried_bits > capacity;
    let mut elapsed = if saturated { tau } else { cpu.time_for(carried_bits, cycles_per_bit) };
    let mut charged_until = 0.0;
    let mut charges = Vec::with_capacity(arrivals.len());
    for &(ue, bits) in arrivals {
        cumulative += bits;
        if !saturated {
            if cumulative <= capacity {
                elapsed += cpu.time_for(bits, cycles_per_bit);
            } else {
                saturated = true;
                elapsed = tau;
            }
        }
        let t_cp = elapsed;
        charges.push(ServerCharge {
            ue,
            t_cp,
            energy: cpu.energy(t_cp - charged_until),
        });
        charged_until = t_cp;
    }
    let backlog_bits = cumulative.saturating_sub(capacity);
    Ok(ServerOutcome {
        charges,
        backlog_bits,
        processed_bits: cumulative - backlog_bits,
    })
}
