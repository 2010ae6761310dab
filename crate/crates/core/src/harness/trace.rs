use serde::{Deserialize, Serialize};

use super::config::AgentKind;
use super::sim::SlotRecord;

/// The scalar columns of one slot, kept in memory for analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: u64,
    pub energy_j: f64,
    pub backlog_bits: u64,
    pub avg_energy_j: f64,
    pub avg_backlog_bits: f64,
    pub x: f64,
    pub y: f64,
    pub t_decide_s: f64,
    pub t_learn_s: f64,
}

impl From<&SlotRecord> for TracePoint {
    fn from(r: &SlotRecord) -> Self {
        Self {
            t: r.t,
            energy_j: r.energy_j,
            backlog_bits: r.backlog_bits,
            avg_energy_j: r.avg_energy_j,
            avg_backlog_bits: r.avg_backlog_bits,
            x: r.uav[0],
            y: r.uav[1],
            t_decide_s: r.t_decide_s,
            t_learn_s: r.t_learn_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std: var.sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub kind: AgentKind,
    pub points: Vec<TracePoint>,
}

impl RunTrace {
    pub fn new(seed: u64, kind: AgentKind) -> Self {
        Self {
            seed,
            kind,
            points: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    fn tail(&self, n: usize) -> &[TracePoint] {
        &self.points[self.points.len().saturating_sub(n)..]
    }

    /// Points in the final `fraction` of the run (at least one).
    pub fn final_fraction(&self, fraction: f64) -> &[TracePoint] {
        let n = ((self.points.len() as f64 * fraction).ceil() as usize).max(1);
        self.tail(n)
    }

    /// Mean instantaneous energy and backlog over the final `fraction`.
    pub fn long_term(&self, fraction: f64) -> (f64, f64) {
        let w = self.final_fraction(fraction);
        let n = w.len().max(1) as f64;
        (
            w.iter().map(|p| p.energy_j).sum::<f64>() / n,
            w.iter().map(|p| p.backlog_bits as f64).sum::<f64>() / n,
        )
    }

    /// Relative change of both running averages between `window` slots
    /// before the end and the end.
    pub fn running_average_change(&self, window: usize) -> Option<(f64, f64)> {
        let end = self.points.last()?;
        let start = self.points.get(self.points.len().checked_sub(window + 1)?)?;
        let rel = |a: f64, b: f64| if a == 0.0 && b == 0.0 { 0.0 } else { (b - a).abs() / a.abs() };
        Some((
            rel(start.avg_energy_j, end.avg_energy_j),
            rel(start.avg_backlog_bits, end.avg_backlog_bits),
        ))
    }

    /// Mean UAV position over the last `n` slots.
    pub fn mean_position(&self, n: usize) -> (f64, f64) {
        let w = self.tail(n);
        let k = w.len().max(1) as f64;
        (w.iter().map(|p| p.x).sum::<f64>() / k, w.iter().map(|p| p.y).sum::<f64>() / k)
    }

    /// Decision plus learning time per slot, skipping the first `warmup` slots.
    pub fn slot_time(&self, warmup: usize) -> MeanStd {
        MeanStd::of(self.points.iter().skip(warmup).map(|p| p.t_decide_s + p.t_learn_s))
    }
}
