use serde::{Deserialize, Serialize};

use super::config::{AgentKind, SimConfig};
use super::run::run_in_memory;
use super::trace::MeanStd;
use crate::Result;

/// Per-slot decision plus learning time of both engines on one env seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub seed: u64,
    pub warmup: u64,
    pub measured: u64,
    pub kernel: MeanStd,
    pub dnn: MeanStd,
}

impl TimingReport {
    /// How many times slower the network agent is per slot.
    pub fn ratio(&self) -> f64 {
        self.dnn.mean / self.kernel.mean
    }

    pub fn render(&self) -> String {
        format!(
            "per-slot decision+learning time over {} slots after {} warmup (seed {})\n\
             kernel: mean {:.3e} s, std {:.3e} s\n\
             dnn:    mean {:.3e} s, std {:.3e} s\n\
             ratio dnn/kernel: {:.1}\n",
            self.measured, self.warmup, self.seed, self.kernel.mean, self.kernel.std, self.dnn.mean, self.dnn.std,
            self.ratio()
        )
    }
}

/// Runs both engines sequentially for `warmup + measured` slots and times
/// the agent calls of the measured part.
pub fn timing_benchmark(config: &SimConfig, seed: u64, warmup: u64, measured: u64) -> Result<TimingReport> {
    let time = |kind: AgentKind| -> Result<MeanStd> {
        let mut cfg = config.clone();
        cfg.agent = kind;
        cfg.timeslots = warmup + measured;
        Ok(run_in_memory(&cfg, seed)?.slot_time(warmup as usize))
    };
    Ok(TimingReport {
        seed,
        warmup,
        measured,
        kernel: time(AgentKind::Kernel)?,
        dnn: time(AgentKind::Dnn)?,
    })
}
