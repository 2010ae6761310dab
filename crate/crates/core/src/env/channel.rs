//! Terrestrial and air-to-ground channel gains, rates and packet budgets.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Large-scale loss at the 1 m reference distance, in dB (positive).
    pub ref_pathloss_db: f64,
    /// Pathloss exponent of the fading links.
    pub beta: f64,
    pub los_a: f64,
    pub los_b: f64,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    pub tx_power_w: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            ref_pathloss_db: 39.0,
            beta: 2.6,
            los_a: 9.61,
            los_b: 0.16,
            bandwidth_hz: 6e6,
            noise_power_w: dbm_to_watts(-90.0),
            tx_power_w: dbm_to_watts(30.0),
        }
    }
}

impl ChannelParams {
    /// Power gain at the reference distance, `10^(-pathloss/10)`.
    pub fn ref_gain(&self) -> f64 {
        10f64.powf(-self.ref_pathloss_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("pathloss_exponent", self.beta),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_dbm", self.noise_power_w),
            ("los_a", self.los_a),
            ("los_b", self.los_b),
            ("tx_power_dbm", self.tx_power_w),
        ];
        for (key, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        if !self.ref_pathloss_db.is_finite() {
            return Err(Error::config("ref_pathloss_db", "must be finite"));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Squared Rayleigh amplitude: exponential with unit mean.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// `fading · g0 · d^-beta` for a given small-scale power `fading`.
pub fn terrestrial_gain_with_fading(params: &ChannelParams, distance_m: f64, fading: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!("terrestrial distance must be positive, got {distance_m}")));
    }
    Ok(fading * params.ref_gain() * distance_m.powf(-params.beta))
}

pub fn terrestrial_gain<R: Rng + ?Sized>(params: &ChannelParams, distance_m: f64, rng: &mut R) -> Result<f64> {
    let fading = draw_fading(rng);
    terrestrial_gain_with_fading(params, distance_m, fading)
}

/// LoS probability for a UAV at altitude `h` and horizontal distance `r`.
///
/// The elevation angle enters in degrees; `r = 0` is straight overhead (90°).
pub fn los_probability(h: f64, r_horizontal: f64, params: &ChannelParams) -> f64 {
    let theta_deg = h.atan2(r_horizontal).to_degrees();
    1.0 / (1.0 + params.los_a * (-params.los_b * (theta_deg - params.los_a)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirGain {
    pub gain: f64,
    pub los: bool,
}

/// Air-to-ground gain from explicit draws: `los_u ~ U(0,1)` selects the
/// branch (LoS when `los_u < P_LoS`) and `fading` is used only on the NLoS
/// branch.
pub fn air_gain_from_draws(
    params: &ChannelParams,
    uav_pos: [f64; 3],
    ue_pos: [f64; 3],
    los_u: f64,
    fading: f64,
) -> Result<AirGain> {
    let dx = uav_pos[0] - ue_pos[0];
    let dy = uav_pos[1] - ue_pos[1];
    let dz = uav_pos[2] - ue_pos[2];
    let r = dx.hypot(dy);
    let d = (r * r + dz * dz).sqrt();
    if !(d > 0.0) {
        return Err(Error::Domain("UAV and UE positions coincide".into()));
    }
    let p_los = los_probability(dz.abs(), r, params);
    let los = los_u < p_los;
    let gain = if los {
        params.ref_gain() * d.powi(-2)
    } else {
        fading * params.ref_gain() * d.powf(-params.beta)
    };
    Ok(AirGain { gain, los })
}

/// Draws the LoS uniform first and the fading sample second, always both,
/// so the stream advances identically on either branch.
pub fn air_gain<R: Rng + ?Sized>(
    params: &ChannelParams,
    uav_pos: [f64; 3],
    ue_pos: [f64; 3],
    rng: &mut R,
) -> Result<AirGain> {
    let los_u: f64 = rng.random();
    let fading = draw_fading(rng);
    air_gain_from_draws(params, uav_pos, ue_pos, los_u, fading)
}

/// Shannon rate `B log2(1 + g P / sigma^2)` in bits/s.
pub fn achievable_rate(gain: f64, params: &ChannelParams) -> f64 {
    params.bandwidth_hz * (gain * params.tx_power_w / params.noise_power_w).ln_1p() / std::f64::consts::LN_2
}

/// Whole packets that fit in the slot, capped at what is buffered.
pub fn deliverable_bits(rate: f64, tau: f64, packet_bits: u64, buffered: u64) -> u64 {
    if !(rate > 0.0) || packet_bits == 0 {
        return 0;
    }
    let packets = (rate * tau / packet_bits as f64).floor();
    // Saturate instead of wrapping on absurd rates.
    let budget = if packets >= (u64::MAX / packet_bits) as f64 {
        u64::MAX
    } else {
        packets as u64 * packet_bits
    };
    budget.min(buffered)
}
