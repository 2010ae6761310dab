//! Flat TOML experiment configuration.
//!
//! Every key has a default; a file only lists what it changes. Unknown keys
//! and out-of-range values are rejected with the offending key's name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dnn::{AdamConfig, DnnAgentParams};
use crate::env::channel::dbm_to_watts;
use crate::env::{Arena, ChannelParams, ComputeParams, Geometry, NetworkConfig, Processor, TaskProfile, Waveform};
use crate::morl::{EpsilonSchedule, KernelAgentParams, KernelScales, WindowOrder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    #[default]
    Kernel,
    Dnn,
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(AgentKind::Kernel),
            "dnn" => Ok(AgentKind::Dnn),
            other => Err(Error::config("agent", format!("expected `kernel` or `dnn`, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Kernel => "kernel",
            AgentKind::Dnn => "dnn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    // Run
    pub agent: AgentKind,
    pub timeslots: u64,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Run per-agent act/learn calls on the rayon pool.
    pub parallel_agents: bool,
    /// Write measured wall-clock times into metrics.csv. Off by default so
    /// that repeated runs produce identical files; timing.csv always has them.
    pub metrics_timing: bool,
    /// Slots between checkpoints written during `run` (0 disables).
    pub checkpoint_every: u64,

    // Learning
    pub n_step: usize,
    pub w_e: f64,
    pub w_d: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_slots: u64,
    pub alpha: f64,
    pub k_r: f64,
    pub mu_q: f64,
    pub mu_d: f64,
    pub mu_0: f64,
    pub sigma_s1: f64,
    pub sigma_s2: f64,
    pub sigma_a: f64,
    pub window_order: WindowOrder,
    /// Energy and backlog are divided by these before reaching the learners.
    pub reward_scale_energy_j: f64,
    pub reward_scale_backlog_bits: f64,

    // Network baseline
    pub dnn_hidden: Vec<usize>,
    pub dnn_batch: usize,
    pub dnn_lr: f64,
    pub dnn_beta1: f64,
    pub dnn_beta2: f64,
    pub dnn_adam_eps: f64,
    pub dnn_target_period: u64,
    pub dnn_replay_capacity: usize,

    // Channel
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub ref_pathloss_db: f64,
    pub pathloss_exponent: f64,
    pub los_a: f64,
    pub los_b: f64,

    // Computing
    pub tau_s: f64,
    pub cycles_per_bit: f64,
    pub packet_bits: u64,
    pub f_ue_hz: f64,
    pub f_uav_hz: f64,
    pub f_bs_hz: f64,
    pub kappa_ue: f64,
    pub kappa_uav: f64,
    pub kappa_bs: f64,

    // Geometry
    pub arena_width_m: f64,
    pub arena_height_m: f64,
    pub bs_x_m: f64,
    pub bs_y_m: f64,
    pub uav_x0_m: f64,
    pub uav_y0_m: f64,
    pub uav_altitude_m: f64,
    pub uav_step_m: f64,
    pub ue_x_m: Vec<f64>,
    pub ue_y_m: Vec<f64>,

    // Task production, one entry per UE
    pub task_base_bits: Vec<f64>,
    pub task_peak_bits: Vec<f64>,
    pub task_period: Vec<u64>,
    pub task_phase: Vec<u64>,
    pub task_waveform: Vec<Waveform>,
    pub task_jitter: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        let net = NetworkConfig::default();
        let ch = &net.channel;
        let cp = &net.compute;
        let g = &net.geometry;
        let kernel = KernelAgentParams::default();
        let dnn = DnnAgentParams::default();
        Self {
            agent: AgentKind::Kernel,
            timeslots: 10_000,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs/default"),
            parallel_agents: false,
            metrics_timing: false,
            checkpoint_every: 0,

            n_step: kernel.n_step,
            w_e: kernel.weights[0],
            w_d: kernel.weights[1],
            gamma: kernel.gamma,
            epsilon_start: 0.1,
            epsilon_end: 0.01,
            epsilon_decay_slots: 3000,
            alpha: kernel.alpha,
            k_r: kernel.k_r,
            mu_q: 2.0,
            mu_d: 0.3,
            mu_0: kernel.mu0,
            sigma_s1: kernel.scales.sigma_pos,
            sigma_s2: kernel.scales.sigma_backlog,
            sigma_a: kernel.scales.sigma_action,
            window_order: WindowOrder::OldestFirst,
            reward_scale_energy_j: 1.0,
            reward_scale_backlog_bits: 1e7,

            dnn_hidden: dnn.hidden,
            dnn_batch: dnn.batch,
            dnn_lr: dnn.adam.lr,
            dnn_beta1: dnn.adam.beta1,
            dnn_beta2: dnn.adam.beta2,
            dnn_adam_eps: dnn.adam.eps,
            dnn_target_period: dnn.target_period,
            dnn_replay_capacity: dnn.replay_capacity,

            bandwidth_hz: ch.bandwidth_hz,
            tx_power_dbm: 30.0,
            noise_power_dbm: -90.0,
            ref_pathloss_db: ch.ref_pathloss_db,
            pathloss_exponent: ch.beta,
            los_a: ch.los_a,
            los_b: ch.los_b,

            tau_s: cp.tau_s,
            cycles_per_bit: cp.cycles_per_bit,
            packet_bits: cp.packet_bits,
            f_ue_hz: cp.ue.freq_hz,
            f_uav_hz: cp.uav.freq_hz,
            f_bs_hz: cp.bs.freq_hz,
            kappa_ue: cp.ue.kappa,
            kappa_uav: cp.uav.kappa,
            kappa_bs: cp.bs.kappa,

            arena_width_m: g.arena.width(),
            arena_height_m: g.arena.height(),
            bs_x_m: g.bs_pos[0],
            bs_y_m: g.bs_pos[1],
            uav_x0_m: g.uav_start[0],
            uav_y0_m: g.uav_start[1],
            uav_altitude_m: g.uav_start[2],
            uav_step_m: g.uav_step_m,
            ue_x_m: g.ue_pos.iter().map(|p| p[0]).collect(),
            ue_y_m: g.ue_pos.iter().map(|p| p[1]).collect(),

            task_base_bits: net.tasks.iter().map(|t| t.base_bits).collect(),
            task_peak_bits: net.tasks.iter().map(|t| t.peak_bits).collect(),
            task_period: net.tasks.iter().map(|t| t.period).collect(),
            task_phase: net.tasks.iter().map(|t| t.phase).collect(),
            task_waveform: net.tasks.iter().map(|t| t.waveform).collect(),
            task_jitter: net.tasks.iter().map(|t| t.jitter_fraction).collect(),
        }
    }
}

impl SimConfig {
    /// Parses a flat TOML document; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: SimConfig = toml::Value::Table(table.clone()).try_into().map_err(|e: toml::de::Error| {
            // Type errors do not carry the field name; retry one key at a
            // time to find it.
            let key = table
                .iter()
                .find(|(k, v)| {
                    let single = toml::Table::from_iter([((*k).clone(), (*v).clone())]);
                    toml::Value::Table(single).try_into::<SimConfig>().is_err()
                })
                .map(|(k, _)| k.clone())
                .unwrap_or_else(|| "<file>".into());
            Error::config(key, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Applies `key=value` overrides; values use TOML syntax, with bare
    /// words taken as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut table = self.to_table();
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must look like key=value"))?;
            let key = key.trim();
            table.insert(key.to_string(), parse_value(key, raw.trim())?);
        }
        Self::from_table(table)
    }

    /// Sets one key; shorthand for a single override.
    pub fn set(&self, key: &str, value: impl std::fmt::Display) -> Result<Self> {
        self.with_overrides(&[format!("{key}={value}")])
    }

    fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    /// The fully resolved config as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table()).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_x_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("w_e", self.w_e, true),
            ("w_d", self.w_d, true),
            ("alpha", self.alpha, false),
            ("k_r", self.k_r, false),
            ("mu_q", self.mu_q, false),
            ("mu_d", self.mu_d, false),
            ("sigma_s1", self.sigma_s1, false),
            ("sigma_s2", self.sigma_s2, false),
            ("sigma_a", self.sigma_a, false),
            ("reward_scale_energy_j", self.reward_scale_energy_j, false),
            ("reward_scale_backlog_bits", self.reward_scale_backlog_bits, false),
            ("dnn_lr", self.dnn_lr, false),
            ("dnn_adam_eps", self.dnn_adam_eps, false),
            ("arena_width_m", self.arena_width_m, false),
            ("arena_height_m", self.arena_height_m, false),
        ];
        for (key, v, zero_ok) in positive {
            let ok = v.is_finite() && if zero_ok { v >= 0.0 } else { v > 0.0 };
            if !ok {
                let bound = if zero_ok { "non-negative" } else { "positive" };
                return Err(Error::config(key, format!("must be {bound} and finite, got {v}")));
            }
        }
        if self.w_e == 0.0 && self.w_d == 0.0 {
            return Err(Error::config("w_e", "w_e and w_d cannot both be zero"));
        }
        if self.timeslots == 0 {
            return Err(Error::config("timeslots", "must be at least 1"));
        }
        if self.n_step == 0 {
            return Err(Error::config("n_step", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        for (key, v) in [("gamma", self.gamma), ("dnn_beta1", self.dnn_beta1), ("dnn_beta2", self.dnn_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1), got {v}")));
            }
        }
        for (key, v) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.mu_0 > 0.0 && self.mu_0 < 1.0) {
            return Err(Error::config("mu_0", format!("must lie in (0, 1), got {}", self.mu_0)));
        }
        if self.dnn_hidden.is_empty() || self.dnn_hidden.contains(&0) {
            return Err(Error::config("dnn_hidden", "need at least one layer, all widths positive"));
        }
        for (key, v) in [
            ("dnn_batch", self.dnn_batch as u64),
            ("dnn_target_period", self.dnn_target_period),
            ("dnn_replay_capacity", self.dnn_replay_capacity as u64),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.dnn_batch > self.dnn_replay_capacity {
            return Err(Error::config("dnn_batch", "cannot exceed dnn_replay_capacity"));
        }
        let m = self.num_ues();
        for (key, len) in [
            ("ue_y_m", self.ue_y_m.len()),
            ("task_base_bits", self.task_base_bits.len()),
            ("task_peak_bits", self.task_peak_bits.len()),
            ("task_period", self.task_period.len()),
            ("task_phase", self.task_phase.len()),
            ("task_waveform", self.task_waveform.len()),
            ("task_jitter", self.task_jitter.len()),
        ] {
            if len != m {
                return Err(Error::config(key, format!("has {len} entries but ue_x_m has {m}")));
            }
        }
        for (key, xs, extent) in [("ue_x_m", &self.ue_x_m, self.arena_width_m), ("ue_y_m", &self.ue_y_m, self.arena_height_m)] {
            if xs.iter().any(|&x| !(0.0..=extent).contains(&x)) {
                return Err(Error::config(key, "every UE must lie inside the arena"));
            }
        }
        self.network()?.validate()
    }

    /// Environment description for the resolved keys.
    pub fn network(&self) -> Result<NetworkConfig> {
        let tasks = (0..self.num_ues())
            .map(|i| TaskProfile {
                base_bits: self.task_base_bits[i],
                peak_bits: self.task_peak_bits[i],
                period: self.task_period[i],
                phase: self.task_phase[i],
                waveform: self.task_waveform[i],
                jitter_fraction: self.task_jitter[i],
            })
            .collect();
        Ok(NetworkConfig {
            channel: ChannelParams {
                ref_pathloss_db: self.ref_pathloss_db,
                beta: self.pathloss_exponent,
                los_a: self.los_a,
                los_b: self.los_b,
                bandwidth_hz: self.bandwidth_hz,
                noise_power_w: dbm_to_watts(self.noise_power_dbm),
                tx_power_w: dbm_to_watts(self.tx_power_dbm),
            },
            compute: ComputeParams {
                ue: Processor {
                    freq_hz: self.f_ue_hz,
                    kappa: self.kappa_ue,
                },
                uav: Processor {
                    freq_hz: self.f_uav_hz,
                    kappa: self.kappa_uav,
                },
                bs: Processor {
                    freq_hz: self.f_bs_hz,
                    kappa: self.kappa_bs,
                },
                cycles_per_bit: self.cycles_per_bit,
                tau_s: self.tau_s,
                packet_bits: self.packet_bits,
            },
            geometry: Geometry {
                uav_start: [self.uav_x0_m, self.uav_y0_m, self.uav_altitude_m],
                bs_pos: [self.bs_x_m, self.bs_y_m, 0.0],
                ue_pos: self.ue_x_m.iter().zip(&self.ue_y_m).map(|(&x, &y)| [x, y, 0.0]).collect(),
                arena: self.arena(),
                uav_step_m: self.uav_step_m,
            },
            tasks,
        })
    }

    pub fn arena(&self) -> Arena {
        Arena {
            x_min: 0.0,
            x_max: self.arena_width_m,
            y_min: 0.0,
            y_max: self.arena_height_m,
        }
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_slots: self.epsilon_decay_slots,
        }
    }

    pub fn kernel_params(&self) -> KernelAgentParams {
        KernelAgentParams {
            alpha: self.alpha,
            k_r: self.k_r,
            gamma: self.gamma,
            n_step: self.n_step,
            weights: [self.w_e, self.w_d],
            epsilon: self.epsilon(),
            scales: KernelScales {
                sigma_pos: self.sigma_s1,
                sigma_backlog: self.sigma_s2,
                sigma_action: self.sigma_a,
            },
            mu0: self.mu_0,
            horizon: self.timeslots,
            window_order: self.window_order,
        }
    }

    pub fn dnn_params(&self) -> DnnAgentParams {
        DnnAgentParams {
            hidden: self.dnn_hidden.clone(),
            batch: self.dnn_batch,
            replay_capacity: self.dnn_replay_capacity,
            target_period: self.dnn_target_period,
            adam: AdamConfig {
                lr: self.dnn_lr,
                beta1: self.dnn_beta1,
                beta2: self.dnn_beta2,
                eps: self.dnn_adam_eps,
            },
            gamma: self.gamma,
            weights: [self.w_e, self.w_d],
            epsilon: self.epsilon(),
            arena: self.arena(),
        }
    }
}

fn parse_value(key: &str, raw: &str) -> Result<toml::Value> {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => Ok(t.remove("v").expect("parsed key")),
        Err(_) if !raw.is_empty() && !raw.contains(['"', '[', '{', '=']) => Ok(toml::Value::String(raw.to_string())),
        Err(e) => Err(Error::config(key, format!("cannot parse value `{raw}`: {}", e.message()))),
    }
}
