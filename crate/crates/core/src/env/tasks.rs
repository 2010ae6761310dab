//! Periodic per-UE task production.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveform {
    /// Peak for the half period centred on the peak slot, base otherwise.
    Square,
    /// Linear ramp from base (half a period away) up to peak.
    Triangular,
}

impl std::str::FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(Waveform::Square),
            "triangular" | "triangle" => Ok(Waveform::Triangular),
            other => Err(Error::config("task_waveform", format!("unknown waveform `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub base_bits: f64,
    pub peak_bits: f64,
    pub period: u64,
    pub phase: u64,
    pub waveform: Waveform,
    /// Multiplicative noise `1 + j·u`, `u ~ U(-1, 1)`.
    pub jitter_fraction: f64,
}

impl TaskProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_bits >= 0.0 && self.base_bits <= self.peak_bits && self.peak_bits.is_finite()) {
            return Err(Error::config("task_base_bits", "need 0 <= base <= peak"));
        }
        if self.period == 0 {
            return Err(Error::config("task_period", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.jitter_fraction) {
            return Err(Error::config("task_jitter", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Noise-free production at slot `t`. Peaks whenever `(t + phase) % period == 0`.
    pub fn waveform_value(&self, t: u64) -> f64 {
        let p = (t + self.phase) % self.period;
        let period = self.period as f64;
        match self.waveform {
            Waveform::Square => {
                // High on [0, P/4) and [3P/4, P) in units of the phase position.
                let shifted = ((p as f64) + period / 4.0) % period;
                if shifted < period / 2.0 {
                    self.peak_bits
                } else {
                    self.base_bits
                }
            }
            Waveform::Triangular => {
                let dist = p.min(self.period - p) as f64;
                self.peak_bits - (self.peak_bits - self.base_bits) * (2.0 * dist / period)
            }
        }
    }

    /// Mean of [`waveform_value`](Self::waveform_value) over one period.
    pub fn period_mean(&self) -> f64 {
        (0..self.period).map(|t| self.waveform_value(t)).sum::<f64>() / self.period as f64
    }
}

/// Bits produced in slot `t`. Always consumes exactly one uniform draw.
pub fn generate_tasks<R: Rng + ?Sized>(profile: &TaskProfile, t: u64, rng: &mut R) -> u64 {
    jittered_bits(profile, t, rng.random_range(-1.0..1.0))
}

/// Production at slot `t` for a given jitter draw `u` in `[-1, 1)`.
pub fn jittered_bits(profile: &TaskProfile, t: u64, u: f64) -> u64 {
    let value = profile.waveform_value(t) * (1.0 + profile.jitter_fraction * u);
    value.max(0.0).round() as u64
}
